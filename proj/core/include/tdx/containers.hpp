// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdx/model.hpp"
#include "tdx/pde_adr.hpp"
#include "tdx/training.hpp"

namespace tdx {

// On-disk containers. All multi-byte integers and doubles are little-endian;
// headers carry a 4-byte magic, a u32 format version and a JSON metadata
// blob. Files are written to a temp path and atomically renamed.

constexpr uint32_t kContainerVersion = 1;

/// "TDXD": header + f64 payload, dataset-major, pair-major, v before u,
/// grid-point-major. Requires homogeneous grid and pair count.
void write_meta_dataset(const std::string& path, const MetaDataset& meta);
MetaDataset read_meta_dataset(const std::string& path);

struct Provenance {
    int64_t steps = 0;
    double final_loss = 0.0;
    uint64_t seed = 0;
};

struct Checkpoint {
    TransducerParams params;
    Provenance provenance;
    std::optional<AdamState> adam;
};

/// "TDXC": header + named parameter table + f64 payload. Optimizer moments
/// ride along as adam.m.<name> / adam.v.<name> entries when present.
void write_checkpoint(const std::string& path, const TransducerParams& params,
                      const Provenance& provenance, const AdamState* adam = nullptr);
Checkpoint read_checkpoint(const std::string& path);

/// IDX (big-endian) tensor files: 0x00000803 for u8 image stacks,
/// 0x00000801 for u8 label vectors.
struct IdxData {
    std::vector<int64_t> dims;
    std::vector<uint8_t> bytes;
};

IdxData read_idx(const std::string& path);
void write_idx(const std::string& path, const std::vector<int64_t>& dims,
               const std::vector<uint8_t>& bytes);

/// Human-readable header dump for any of the three container kinds.
std::string inspect_container(const std::string& path);

} // namespace tdx
