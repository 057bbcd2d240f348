#pragma once

#include "cdrec/train.hpp"

// CACDR: one rating-matrix autoencoder per domain plus an MLP mapping the
// source intrinsic representation to the target one. Training runs in two
// stages: independent initialization of the three parts, then coupled
// learning of the source encoder, mapper and target decoder end-to-end on
// the masked target reconstruction. Cold-start rows are predicted as
// clamp01(Dt(F(Es(row)))).

namespace cdrec {

struct CacdrConfig {
    /// Encoder widths after the input layer; the last entry is the latent
    /// width k. The decoder mirrors the encoder back to the input width.
    std::vector<int> encoder_sizes = {256, 128, 64};
    /// Hidden widths of the k -> ... -> k mapper.
    std::vector<int> mapper_hidden = {128};
    int batch_size = 32;
    StageConfig init{250, 1e-3, 1e-5};
    StageConfig coupled{300, 1e-5, 1e-5};
    std::uint64_t seed = 0;

    int k() const { return encoder_sizes.back(); }
    void validate() const;
};

struct CacdrModel {
    DenseNetwork source_encoder, source_decoder;
    DenseNetwork target_encoder, target_decoder;
    DenseNetwork mapper;
    int k = 0;
    Axis shared_axis = Axis::Items;
};

/// Seeded construction without any training (what epochs=0 training yields).
CacdrModel cacdr_make_model(Axis axis, int source_width, int target_width,
                            const CacdrConfig& cfg);

/// Stage A: trains the source autoencoder on the full source matrix, the
/// target autoencoder on the training entities of the cold-start-masked
/// target, then the mapper on dense MSE between the two encoders' outputs
/// over training entities. The three parts are trained independently, in
/// that order.
CacdrModel cacdr_init_stage(const TrainViews& views, const CacdrConfig& cfg,
                            TrainTrace* trace = nullptr, const ProgressFn& progress = {});

/// Stage B: jointly optimizes source encoder, mapper and target decoder on
/// the masked loss ||Mt - Dt(F(Es(Ms)))|| over training entities. The source
/// decoder and target encoder are frozen.
void cacdr_coupled_stage(CacdrModel& model, const TrainViews& views, const CacdrConfig& cfg,
                         TrainTrace* trace = nullptr, const ProgressFn& progress = {});

/// One prediction row per source row, clamped to [0,1].
Matrix cacdr_predict(const CacdrModel& model, const Matrix& source_rows);

/// The coupled composition Es -> F -> Dt as a single network (for checks).
DenseNetwork cacdr_stacked(const CacdrModel& model);

}  // namespace cdrec
