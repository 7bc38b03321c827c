#pragma once

// Checkpoint directory: manifest.txt (key=value lines) plus one raw
// little-endian tensor file per array.
//
//   tensor.<name>=<f32|f64> <rows>x<cols> <bytes> <file>
//
// Reals in the manifest are written as hex floats so they round-trip exactly.

#include <filesystem>
#include <map>
#include <string>

#include "bridge/bridge_net.hpp"

namespace bridge {

inline constexpr int kCheckpointVersion = 1;

using Manifest = std::map<std::string, std::string>;

// extra entries are stored under "meta.<key>".
void save_checkpoint(const BridgeNetwork& net, const std::filesystem::path& dir,
                     const Manifest& extra = {});
BridgeNetwork load_checkpoint(const std::filesystem::path& dir);

// Distilled sets use the same layout (fused, image, label, losses).
void save_distilled(const DistilledSet& d, const std::filesystem::path& dir);
DistilledSet load_distilled(const std::filesystem::path& dir);

Manifest read_manifest(const std::filesystem::path& dir);
// The "meta.*" entries with the prefix removed.
Manifest checkpoint_meta(const std::filesystem::path& dir);

}  // namespace bridge
