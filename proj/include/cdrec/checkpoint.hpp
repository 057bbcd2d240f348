#pragma once

#include "cdrec/cacdr.hpp"
#include "cdrec/lfacdr.hpp"

#include "json.hpp"

#include <optional>
#include <string>

// Self-describing JSON model checkpoints: version tag, config echo, layer
// shapes and parameters in row-major order; LFACDR adds the latent-factor
// blocks. Doubles round-trip exactly.

namespace cdrec {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    std::string method;      // cacdr | lfacdr | baseline
    nlohmann::json config;   // fully-resolved run configuration
    std::optional<CacdrModel> cacdr;
    std::optional<LfacdrModel> lfacdr;
    double baseline_mean = 0.0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json network_to_json(const DenseNetwork& net);
DenseNetwork network_from_json(const nlohmann::json& j);

}  // namespace cdrec
