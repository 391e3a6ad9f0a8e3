#pragma once

#include <filesystem>
#include <string>

#include "planefield/trainer.hpp"

namespace planefield {

/// "PLNF0001", u64 LE header length, JSON header, LE f64 blobs, CRC32.
std::string serialize_checkpoint(TrainState& state);
TrainState deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace planefield
