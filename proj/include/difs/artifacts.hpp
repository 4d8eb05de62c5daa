#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "difs/cem.hpp"
#include "difs/difs.hpp"
#include "difs/metrics.hpp"

namespace difs {

using json = nlohmann::ordered_json;

// Trained-sampler checkpoint, tagged by method. JSON layout (model.ckpt):
// shapes, parameters, conditioning bounds, schedule, standardization, and
// seed provenance for the diffusion sampler; mixture parameters for cem2.
struct ModelCheckpoint {
  std::string method;  // "difs" | "cem2"
  std::string environment;
  uint64_t seed = 0;
  std::optional<DifsModel> difs_model;
  std::optional<Gmm> gmm;
};

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::string& path);

// dataset.bin / final_samples.bin: "DIFSDS01", u32 version, u32 dim,
// u64 count, then count rows of dim little-endian doubles followed by the
// robustness value.
void save_dataset(const std::string& path, const LabeledDataset& dataset, int dim);
LabeledDataset load_dataset(const std::string& path, int* dim_out = nullptr);

// ground_truth.bin: "DIFSGT01", u32 version, u32 feature dim, u64 count,
// u64 seed, u64 draws, f64 estimate, u8 zero-failures flag, then the feature
// rows. The human-readable provenance report goes next to it as JSON.
void save_ground_truth(const std::string& path, const GroundTruth& gt);
GroundTruth load_ground_truth(const std::string& path);
json ground_truth_report(const GroundTruth& gt);

json metrics_to_json(const MetricsReport& report);

json iteration_to_json(const IterationRecord& rec);

}  // namespace difs
