#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cgtex/energy_model.hpp"
#include "cgtex/inpainting.hpp"
#include "cgtex/trainer.hpp"

namespace cgtex {

// Job description parsed from JSON. Unknown keys are rejected with the
// offending field path; unset fields materialize to modality defaults when
// the job is resolved against an exemplar.
struct InpaintJobConfig {
    int search_steps = 10;
    int update_steps = 50;
    std::vector<int> grid_stride;  // empty = modality default
    int border = -1;               // -1 = modality default
    std::optional<std::vector<int>> template_offset;
    std::optional<std::vector<std::int64_t>> interval;  // sound mask [start, end)
};

struct JobConfig {
    std::optional<Modality> modality;  // when set, must match the exemplar
    TrainMode mode = TrainMode::c_cgcnn;
    StatKind statistic = StatKind::gram;
    std::optional<int> m, n, channels;
    int batch = 3;           // K
    int langevin_steps = 10; // N
    int iterations = 5000;   // T
    float lr_w = 1e-3f;
    float lr_theta = 1e-3f;
    float epsilon = 1e-3f;
    OptKind preconditioner = OptKind::adam;
    bool noise = true;
    float init_noise_std = 0.1f;
    float kle_weight = 1.0f;
    std::uint64_t seed = 0;
    int snapshot_interval = 0;
    std::optional<std::vector<int>> resize;  // [H, W], image exemplars only
    std::string out_dir = "out";
    InpaintJobConfig inpaint;
};

JobConfig parse_job_config(const std::string& json_text);
JobConfig parse_job_config_file(const std::string& path);

// Modality defaults for the sub-network and the inpainting border.
int resolved_m(const JobConfig& cfg, Modality modality);
int resolved_n(const JobConfig& cfg, Modality modality);
int resolved_channels(const JobConfig& cfg, Modality modality);
int resolved_border(const JobConfig& cfg, Modality modality);

NetworkSpec resolved_spec(const JobConfig& cfg, Modality modality);
TrainConfig resolved_train_config(const JobConfig& cfg);

// Every field materialized, including defaults; re-running a job from this
// echo reproduces it byte for byte.
std::string effective_config_json(const JobConfig& cfg, Modality modality);

}  // namespace cgtex
