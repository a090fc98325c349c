#pragma once

#include <string>

#include "trustgrid/agents.hpp"
#include "trustgrid/nn.hpp"

namespace trustgrid {

namespace detect {
struct Detector;
}

// Versioned flat text checkpoints. Parameter values are written as hexfloats,
// so save/load round-trips are bit-exact. Loading a file with a newer format
// version is refused, naming both versions.
inline constexpr int kCheckpointVersion = 1;

void save_policy(const PolicyParams& params, const std::string& path);
PolicyParams load_policy(const std::string& path);

void save_detector(const detect::Detector& det, const std::string& path);
detect::Detector load_detector(const std::string& path);

// FNV-1a hash of the file contents, hex-encoded; used as the checkpoint id
// in dataset provenance.
std::string checkpoint_id(const std::string& path);

}  // namespace trustgrid
