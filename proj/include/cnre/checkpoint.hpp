#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cnre/config.hpp"
#include "cnre/dataset.hpp"
#include "cnre/error.hpp"
#include "cnre/params.hpp"

namespace cnre {

inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  enum class Kind { Io, BadMagic, VersionMismatch, Truncated, BadHeader, ShapeMismatch, Incompatible };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Trained parameters plus everything needed to rebuild the model around them.
struct Checkpoint {
  TrainConfig config;
  std::vector<std::string> behaviors;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  ParameterStore store;  // step() is the training step
};

/// Rounds every parameter value to the nearest float, as a save/load cycle would.
void round_to_f32(ParameterStore& store);

/// Layout: "CNRE", version byte, u32 LE header length, JSON header, then every
/// slot's values as f32 LE in header order. Adam moments are not stored.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError(Incompatible) unless the checkpoint was trained on a
/// dataset with the same behaviors and dimensions.
void check_compatible(const Checkpoint& ckpt, const InteractionDataset& data);

}  // namespace cnre
