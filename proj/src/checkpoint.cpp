#include "cnre/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <tuple>

#include "json_config.hpp"

namespace cnre {

namespace {

using Kind = CheckpointError::Kind;
using detail::json;

constexpr std::array<char, 4> kMagic{'C', 'N', 'R', 'E'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF),
                              static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw CheckpointError(Kind::Truncated, std::string("checkpoint truncated while reading ") + what);
  }
}

json header_of(const Checkpoint& c) {
  json slots = json::array();
  for (const auto& s : c.store.slots()) {
    slots.push_back({{"name", s.name}, {"rows", s.value.rows()}, {"cols", s.value.cols()}});
  }
  return {{"version", kCheckpointVersion},
          {"dim", c.config.model.dim},
          {"hyperedges", c.config.model.hyperedges},
          {"num_users", c.num_users},
          {"num_items", c.num_items},
          {"behaviors", c.behaviors},
          {"layer_counts", c.config.model.layer_counts},
          {"step", c.store.step()},
          {"model", detail::to_json(c.config.model)},
          {"train", detail::to_json(c.config)},
          {"slots", slots}};
}

}  // namespace

void round_to_f32(ParameterStore& store) {
  for (auto& s : store.slots()) {
    for (auto& v : s.value.values()) v = static_cast<double>(static_cast<float>(v));
  }
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const std::string header = header_of(ckpt).dump();
  out.write(kMagic.data(), kMagic.size());
  out.put(static_cast<char>(kCheckpointVersion));
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& s : ckpt.store.slots()) {
    for (const double v : s.value.values()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      put_u32(out, bits);
    }
  }
  if (!out) throw CheckpointError(Kind::Io, "failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (in.gcount() != 4 || magic != kMagic) {
    throw CheckpointError(Kind::BadMagic, "not a checkpoint file (bad magic)");
  }
  char version = 0;
  read_exact(in, &version, 1, "version");
  if (static_cast<std::uint8_t>(version) != kCheckpointVersion) {
    throw CheckpointError(Kind::VersionMismatch,
                          "unsupported checkpoint version " +
                              std::to_string(static_cast<unsigned>(static_cast<std::uint8_t>(version))) +
                              " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  std::array<unsigned char, 4> len{};
  read_exact(in, reinterpret_cast<char*>(len.data()), 4, "header length");
  std::string text(get_u32(len.data()), '\0');
  read_exact(in, text.data(), text.size(), "header");

  Checkpoint c;
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> shapes;
  try {
    const json h = json::parse(text);
    c.config = detail::train_config_from_json(h.at("train"));
    c.config.model = detail::model_config_from_json(h.at("model"));
    c.behaviors = h.at("behaviors").get<std::vector<std::string>>();
    c.num_users = h.at("num_users").get<std::size_t>();
    c.num_items = h.at("num_items").get<std::size_t>();
    c.store.set_step(h.at("step").get<std::uint64_t>());
    for (const auto& s : h.at("slots")) {
      shapes.emplace_back(s.at("name").get<std::string>(), s.at("rows").get<std::size_t>(),
                          s.at("cols").get<std::size_t>());
    }
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::BadHeader, std::string("malformed checkpoint header: ") + e.what());
  } catch (const ParseError& e) {
    throw CheckpointError(Kind::BadHeader, std::string("malformed checkpoint header: ") + e.what());
  }

  std::vector<unsigned char> buf;
  for (const auto& [name, rows, cols] : shapes) {
    Matrix m(rows, cols);
    buf.resize(4 * m.values().size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
      throw CheckpointError(Kind::ShapeMismatch, "checkpoint payload shorter than declared shape of '" +
                                                     name + "' (" + std::to_string(rows) + "x" +
                                                     std::to_string(cols) + ")");
    }
    auto dst = m.values();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = static_cast<double>(std::bit_cast<float>(get_u32(&buf[4 * k])));
    }
    c.store.add(name, std::move(m));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError(Kind::ShapeMismatch, "checkpoint payload longer than declared shapes");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::Io, "cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::Io, "cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

void check_compatible(const Checkpoint& ckpt, const InteractionDataset& data) {
  if (ckpt.behaviors != data.behaviors.names) {
    throw CheckpointError(Kind::Incompatible, "checkpoint behaviors differ from the dataset's");
  }
  if (ckpt.num_users != data.num_users() || ckpt.num_items != data.num_items()) {
    throw CheckpointError(Kind::Incompatible,
                          "checkpoint was trained on " + std::to_string(ckpt.num_users) + " users x " +
                              std::to_string(ckpt.num_items) + " items, dataset has " +
                              std::to_string(data.num_users()) + " x " +
                              std::to_string(data.num_items()));
  }
}

}  // namespace cnre
