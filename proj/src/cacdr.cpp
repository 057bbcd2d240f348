#include "cdrec/cacdr.hpp"

#include <cmath>
#include <stdexcept>

namespace cdrec {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::vector<int> encoder_widths(int input, const std::vector<int>& sizes) {
    std::vector<int> w{input};
    w.insert(w.end(), sizes.begin(), sizes.end());
    return w;
}

std::vector<int> decoder_widths(int input, const std::vector<int>& sizes) {
    std::vector<int> w(sizes.rbegin(), sizes.rend());
    w.push_back(input);
    return w;
}

std::vector<int> mapper_widths(int k, const std::vector<int>& hidden) {
    std::vector<int> w{k};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(k);
    return w;
}

struct EpochAccumulator {
    double sq_sum = 0.0;
    double count = 0.0;

    void add(const StepStats& s) {
        sq_sum += s.sq_sum;
        count += s.count;
    }
    double rmse() const { return count > 0.0 ? std::sqrt(sq_sum / count) : 0.0; }
};

void note_epoch(const std::string& stage, int epoch, int total, double rmse, TrainTrace* trace,
                const ProgressFn& progress) {
    if (trace) (*trace)[stage].push_back(rmse);
    if (progress) progress(stage, epoch, total, rmse);
}

// Masked reconstruction training of one autoencoder over the given rows.
void train_autoencoder(const std::string& stage, DenseNetwork& enc, DenseNetwork& dec,
                       const RatingMatrix& mat, Axis axis, const std::vector<int>& rows,
                       const StageConfig& sc, int batch_size, std::mt19937_64& rng,
                       TrainTrace* trace, const ProgressFn& progress) {
    AdamState enc_state = make_adam_state(enc);
    AdamState dec_state = make_adam_state(dec);
    std::vector<ChainPart> chain{{&enc, &enc_state, sc.l2}, {&dec, &dec_state, sc.l2}};
    Matrix values, mask;
    for (int epoch = 1; epoch <= sc.epochs; ++epoch) {
        EpochAccumulator acc;
        for (const auto& batch : make_batches(rows, batch_size, rng)) {
            mat.materialize_rows(axis, batch, values, mask);
            acc.add(chain_step(chain, values, values, &mask, LossKind::MaskedMSE, sc.lr));
        }
        check_finite(enc, stage);
        check_finite(dec, stage);
        note_epoch(stage, epoch, sc.epochs, acc.rmse(), trace, progress);
    }
}

std::vector<int> all_rows(const RatingMatrix& mat, Axis axis) {
    std::vector<int> rows(static_cast<std::size_t>(mat.axis_rows(axis)));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    return rows;
}

}  // namespace

void CacdrConfig::validate() const {
    require(!encoder_sizes.empty(), "CacdrConfig: encoder_sizes must not be empty");
    for (int s : encoder_sizes) require(s >= 1, "CacdrConfig: layer sizes must be >= 1");
    for (int s : mapper_hidden) require(s >= 1, "CacdrConfig: mapper sizes must be >= 1");
    require(batch_size >= 1, "CacdrConfig: batch_size must be >= 1");
    require(init.lr > 0.0 && coupled.lr > 0.0, "CacdrConfig: learning rates must be > 0");
    require(init.epochs >= 0 && coupled.epochs >= 0, "CacdrConfig: epochs must be >= 0");
    require(init.l2 >= 0.0 && coupled.l2 >= 0.0, "CacdrConfig: l2 must be >= 0");
}

CacdrModel cacdr_make_model(Axis axis, int source_width, int target_width,
                            const CacdrConfig& cfg) {
    cfg.validate();
    require(source_width >= 1 && target_width >= 1, "cacdr_make_model: widths must be >= 1");
    auto rng = make_rng(cfg.seed, 101);
    CacdrModel model;
    model.k = cfg.k();
    model.shared_axis = axis;
    model.source_encoder = make_network(encoder_widths(source_width, cfg.encoder_sizes), rng);
    model.source_decoder = make_network(decoder_widths(source_width, cfg.encoder_sizes), rng);
    model.target_encoder = make_network(encoder_widths(target_width, cfg.encoder_sizes), rng);
    model.target_decoder = make_network(decoder_widths(target_width, cfg.encoder_sizes), rng);
    model.mapper = make_network(mapper_widths(model.k, cfg.mapper_hidden), rng);
    return model;
}

CacdrModel cacdr_init_stage(const TrainViews& views, const CacdrConfig& cfg, TrainTrace* trace,
                            const ProgressFn& progress) {
    require(views.source && views.target_train, "cacdr_init_stage: null views");
    require(!views.train_entities.empty(), "cacdr_init_stage: zero training entities");

    const Axis axis = views.axis;
    CacdrModel model = cacdr_make_model(axis, views.source->row_width(axis),
                                        views.target_train->row_width(axis), cfg);

    // (a) source autoencoder on the full source matrix
    auto src_rng = make_rng(cfg.seed, 102);
    train_autoencoder("init/source_ae", model.source_encoder, model.source_decoder,
                      *views.source, axis, all_rows(*views.source, axis), cfg.init,
                      cfg.batch_size, src_rng, trace, progress);

    // (b) target autoencoder on the cold-start-masked training entities
    auto tgt_rng = make_rng(cfg.seed, 103);
    train_autoencoder("init/target_ae", model.target_encoder, model.target_decoder,
                      *views.target_train, axis, views.train_entities, cfg.init, cfg.batch_size,
                      tgt_rng, trace, progress);

    // (c) mapper between the two intrinsic representations (dense MSE)
    Matrix src_values, src_mask, tgt_values, tgt_mask;
    views.source->materialize_rows(axis, views.train_entities, src_values, src_mask);
    views.target_train->materialize_rows(axis, views.train_entities, tgt_values, tgt_mask);
    const Matrix source_latents = dense_forward(model.source_encoder, src_values);
    const Matrix target_latents = dense_forward(model.target_encoder, tgt_values);

    AdamState map_state = make_adam_state(model.mapper);
    std::vector<ChainPart> chain{{&model.mapper, &map_state, cfg.init.l2}};
    auto map_rng = make_rng(cfg.seed, 104);
    std::vector<int> latent_rows(static_cast<std::size_t>(source_latents.rows()));
    for (std::size_t i = 0; i < latent_rows.size(); ++i) latent_rows[i] = static_cast<int>(i);
    for (int epoch = 1; epoch <= cfg.init.epochs; ++epoch) {
        EpochAccumulator acc;
        for (const auto& batch : make_batches(latent_rows, cfg.batch_size, map_rng)) {
            Matrix x(static_cast<Eigen::Index>(batch.size()), source_latents.cols());
            Matrix y(static_cast<Eigen::Index>(batch.size()), target_latents.cols());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                x.row(static_cast<Eigen::Index>(i)) = source_latents.row(batch[i]);
                y.row(static_cast<Eigen::Index>(i)) = target_latents.row(batch[i]);
            }
            acc.add(chain_step(chain, x, y, nullptr, LossKind::DenseMSE, cfg.init.lr));
        }
        check_finite(model.mapper, "init/mapper");
        note_epoch("init/mapper", epoch, cfg.init.epochs, acc.rmse(), trace, progress);
    }
    return model;
}

void cacdr_coupled_stage(CacdrModel& model, const TrainViews& views, const CacdrConfig& cfg,
                         TrainTrace* trace, const ProgressFn& progress) {
    require(views.source && views.target_train, "cacdr_coupled_stage: null views");
    cfg.validate();

    AdamState enc_state = make_adam_state(model.source_encoder);
    AdamState map_state = make_adam_state(model.mapper);
    AdamState dec_state = make_adam_state(model.target_decoder);
    std::vector<ChainPart> chain{{&model.source_encoder, &enc_state, cfg.coupled.l2},
                                 {&model.mapper, &map_state, cfg.coupled.l2},
                                 {&model.target_decoder, &dec_state, cfg.coupled.l2}};
    auto rng = make_rng(cfg.seed, 105);
    Matrix src_values, src_mask, tgt_values, tgt_mask;
    for (int epoch = 1; epoch <= cfg.coupled.epochs; ++epoch) {
        EpochAccumulator acc;
        for (const auto& batch : make_batches(views.train_entities, cfg.batch_size, rng)) {
            views.source->materialize_rows(views.axis, batch, src_values, src_mask);
            views.target_train->materialize_rows(views.axis, batch, tgt_values, tgt_mask);
            acc.add(chain_step(chain, src_values, tgt_values, &tgt_mask, LossKind::MaskedMSE,
                               cfg.coupled.lr));
        }
        check_finite(model.source_encoder, "coupled");
        check_finite(model.mapper, "coupled");
        check_finite(model.target_decoder, "coupled");
        note_epoch("coupled", epoch, cfg.coupled.epochs, acc.rmse(), trace, progress);
    }
}

Matrix cacdr_predict(const CacdrModel& model, const Matrix& source_rows) {
    const Matrix out = chain_forward(
        {&model.source_encoder, &model.mapper, &model.target_decoder}, source_rows);
    return out.cwiseMax(0.0).cwiseMin(1.0);
}

DenseNetwork cacdr_stacked(const CacdrModel& model) {
    return concat_networks({&model.source_encoder, &model.mapper, &model.target_decoder});
}

}  // namespace cdrec
