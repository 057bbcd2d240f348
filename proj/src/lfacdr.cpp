#include "cdrec/lfacdr.hpp"

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

// masked mean + gradient wrt pred; returns cell count (0 if mask empty)
double masked_term(const Matrix& pred, const Matrix& target, const Matrix& mask, double& value,
                   Matrix& dpred) {
    const double count = mask.sum();
    if (count < 1.0) {
        value = 0.0;
        dpred = Matrix::Zero(pred.rows(), pred.cols());
        return 0.0;
    }
    const Matrix diff = (pred - target).cwiseProduct(mask);
    value = diff.squaredNorm() / count;
    dpred = (2.0 / count) * diff;
    return count;
}

double dense_term(const Matrix& a, const Matrix& b, double& value, Matrix& da) {
    const Matrix diff = a - b;
    const double count = static_cast<double>(a.size());
    value = diff.squaredNorm() / count;
    da = (2.0 / count) * diff;
    return count;
}

std::vector<int> iota_rows(int n) {
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
    return rows;
}

Matrix gather_rows(const Matrix& m, const std::vector<int>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

Matrix gather_cols(const Matrix& m, const std::vector<int>& cols) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
    return out;
}

void note_epoch(const std::string& stage, int epoch, int total, double rmse, TrainTrace* trace,
                const ProgressFn& progress) {
    if (trace) (*trace)[stage].push_back(rmse);
    if (progress) progress(stage, epoch, total, rmse);
}

struct TermAccum {
    double sq_sum = 0.0;
    double count = 0.0;
    void add(double sq, double cnt) {
        sq_sum += sq;
        count += cnt;
    }
    double mean() const { return count > 0.0 ? sq_sum / count : 0.0; }
    double rmse() const { return count > 0.0 ? std::sqrt(sq_sum / count) : 0.0; }
};

// Cyclic pairing of item batches and user batches for one epoch.
struct BatchSchedule {
    std::vector<std::vector<int>> item_batches;
    std::vector<std::vector<int>> user_batches;
    std::size_t steps() const { return std::max(item_batches.size(), user_batches.size()); }
    const std::vector<int>& items(std::size_t s) const {
        return item_batches[s % item_batches.size()];
    }
    const std::vector<int>& users(std::size_t s) const {
        return user_batches[s % user_batches.size()];
    }
};

BatchSchedule make_schedule(const std::vector<int>& item_rows, const std::vector<int>& user_rows,
                            int batch_size, std::mt19937_64& rng) {
    BatchSchedule sched;
    sched.item_batches = make_batches(item_rows, batch_size, rng);
    sched.user_batches = make_batches(user_rows, batch_size, rng);
    return sched;
}

void check_domain_finite(const LfacdrDomain& d, const std::string& stage) {
    check_finite(d.item_encoder, stage);
    check_finite(d.item_decoder, stage);
    check_finite(d.user_encoder, stage);
    check_finite(d.user_decoder, stage);
    if (!d.item_latents.allFinite() || !d.user_latents.allFinite())
        throw NumericalError("non-finite latent factors (" + stage + ")", stage);
}

// One joint-objective optimizer step over an (item batch, user batch) pair.
// Returns the bilinear masked stats for logging plus the term values.
struct DomainStepStats {
    JointLossTerms terms;
    double bilinear_sq = 0.0;
    double bilinear_count = 0.0;
};

struct DomainTrainer {
    LfacdrDomain* domain;
    const RatingMatrix* ratings;
    double lambda;
    double l2;
    AdamState item_enc_state, item_dec_state, user_enc_state, user_dec_state;
    AdamMatrixState x_state, y_state;

    DomainTrainer(LfacdrDomain& d, const RatingMatrix& r, double lambda_, double l2_)
        : domain(&d),
          ratings(&r),
          lambda(lambda_),
          l2(l2_),
          item_enc_state(make_adam_state(d.item_encoder)),
          item_dec_state(make_adam_state(d.item_decoder)),
          user_enc_state(make_adam_state(d.user_encoder)),
          user_dec_state(make_adam_state(d.user_decoder)),
          x_state(make_adam_state(d.item_latents)),
          y_state(make_adam_state(d.user_latents)) {}

    DomainStepStats step(const std::vector<int>& item_batch, const std::vector<int>& user_batch,
                         double lr) {
        LfacdrDomain& d = *domain;
        DomainStepStats out;

        Matrix M, M_mask, U, U_mask;
        ratings->materialize_rows(Axis::Items, item_batch, M, M_mask);
        ratings->materialize_rows(Axis::Users, user_batch, U, U_mask);
        const Matrix X = gather_rows(d.item_latents, item_batch);
        const Matrix Y = gather_rows(d.user_latents, user_batch);

        Matrix dX = Matrix::Zero(X.rows(), X.cols());
        Matrix dY = Matrix::Zero(Y.rows(), Y.cols());

        // (i) masked ||M - D_m(X)||^2
        ForwardCache dm_cache;
        const Matrix M_hat = dense_forward(d.item_decoder, X, &dm_cache);
        Matrix dM_hat;
        masked_term(M_hat, M, M_mask, out.terms.item_recon, dM_hat);
        Gradients item_dec_grads = zero_gradients(d.item_decoder);
        dX += backprop_through(d.item_decoder, dm_cache, dM_hat, item_dec_grads);

        // (ii) masked ||U - D_u(Y)||^2
        ForwardCache du_cache;
        const Matrix U_hat = dense_forward(d.user_decoder, Y, &du_cache);
        Matrix dU_hat;
        masked_term(U_hat, U, U_mask, out.terms.user_recon, dU_hat);
        Gradients user_dec_grads = zero_gradients(d.user_decoder);
        dY += backprop_through(d.user_decoder, du_cache, dU_hat, user_dec_grads);

        // (iii) dense ||Y - E_u(U)||^2
        ForwardCache eu_cache;
        const Matrix Y_enc = dense_forward(d.user_encoder, U, &eu_cache);
        Matrix dtie_u;
        dense_term(Y, Y_enc, out.terms.user_tie, dtie_u);
        dY += dtie_u;
        Gradients user_enc_grads = zero_gradients(d.user_encoder);
        backprop_through(d.user_encoder, eu_cache, -dtie_u, user_enc_grads);

        // (iv) dense ||X - E_m(M)||^2
        ForwardCache em_cache;
        const Matrix X_enc = dense_forward(d.item_encoder, M, &em_cache);
        Matrix dtie_m;
        dense_term(X, X_enc, out.terms.item_tie, dtie_m);
        dX += dtie_m;
        Gradients item_enc_grads = zero_gradients(d.item_encoder);
        backprop_through(d.item_encoder, em_cache, -dtie_m, item_enc_grads);

        // (v) lambda * masked ||X Y^T - R||^2 on the batch block
        const Matrix R_block = gather_cols(M, user_batch);
        const Matrix R_mask = gather_cols(M_mask, user_batch);
        const Matrix B = X * Y.transpose();
        double bilinear_raw = 0.0;
        Matrix dB;
        const double bcount = masked_term(B, R_block, R_mask, bilinear_raw, dB);
        out.terms.bilinear = lambda * bilinear_raw;
        out.bilinear_sq = bilinear_raw * (bcount > 0.0 ? bcount : 0.0);
        out.bilinear_count = bcount;
        if (bcount > 0.0) {
            dX += lambda * (dB * Y);
            dY += lambda * (dB.transpose() * X);
        }

        add_l2_gradient(d.item_encoder, l2, item_enc_grads);
        add_l2_gradient(d.item_decoder, l2, item_dec_grads);
        add_l2_gradient(d.user_encoder, l2, user_enc_grads);
        add_l2_gradient(d.user_decoder, l2, user_dec_grads);

        adam_step(d.item_encoder, item_enc_grads, item_enc_state, lr);
        adam_step(d.item_decoder, item_dec_grads, item_dec_state, lr);
        adam_step(d.user_encoder, user_enc_grads, user_enc_state, lr);
        adam_step(d.user_decoder, user_dec_grads, user_dec_state, lr);
        adam_step_rows(d.item_latents, dX, item_batch, x_state, lr, "item latents");
        adam_step_rows(d.user_latents, dY, user_batch, y_state, lr, "user latents");
        return out;
    }
};

}  // namespace

void LfacdrConfig::validate() const {
    require(!encoder_sizes.empty(), "LfacdrConfig: encoder_sizes must not be empty");
    for (int s : encoder_sizes) require(s >= 1, "LfacdrConfig: layer sizes must be >= 1");
    for (int s : mapper_hidden) require(s >= 1, "LfacdrConfig: mapper sizes must be >= 1");
    require(batch_size >= 1, "LfacdrConfig: batch_size must be >= 1");
    require(lambda >= 0.0, "LfacdrConfig: lambda must be >= 0");
    require(init.lr > 0.0 && coupled.lr > 0.0, "LfacdrConfig: learning rates must be > 0");
    require(init.epochs >= 0 && coupled.epochs >= 0, "LfacdrConfig: epochs must be >= 0");
    require(init.l2 >= 0.0 && coupled.l2 >= 0.0, "LfacdrConfig: l2 must be >= 0");
}

JointLossTerms joint_latent_loss(const LfacdrDomain& domain, const Matrix& M,
                                 const Matrix& M_mask, const Matrix& U, const Matrix& U_mask,
                                 const Matrix& R, const Matrix& R_mask, double lambda,
                                 LfacdrDomainGrads* grads) {
    require(lambda >= 0.0, "joint_latent_loss: lambda must be >= 0");
    const Matrix& X = domain.item_latents;
    const Matrix& Y = domain.user_latents;

    JointLossTerms terms;
    LfacdrDomainGrads g;
    g.item_encoder = zero_gradients(domain.item_encoder);
    g.item_decoder = zero_gradients(domain.item_decoder);
    g.user_encoder = zero_gradients(domain.user_encoder);
    g.user_decoder = zero_gradients(domain.user_decoder);
    g.d_item_latents = Matrix::Zero(X.rows(), X.cols());
    g.d_user_latents = Matrix::Zero(Y.rows(), Y.cols());

    ForwardCache dm_cache;
    const Matrix M_hat = dense_forward(domain.item_decoder, X, &dm_cache);
    Matrix dM_hat;
    masked_term(M_hat, M, M_mask, terms.item_recon, dM_hat);
    g.d_item_latents += backprop_through(domain.item_decoder, dm_cache, dM_hat, g.item_decoder);

    ForwardCache du_cache;
    const Matrix U_hat = dense_forward(domain.user_decoder, Y, &du_cache);
    Matrix dU_hat;
    masked_term(U_hat, U, U_mask, terms.user_recon, dU_hat);
    g.d_user_latents += backprop_through(domain.user_decoder, du_cache, dU_hat, g.user_decoder);

    ForwardCache eu_cache;
    const Matrix Y_enc = dense_forward(domain.user_encoder, U, &eu_cache);
    Matrix dtie_u;
    dense_term(Y, Y_enc, terms.user_tie, dtie_u);
    g.d_user_latents += dtie_u;
    backprop_through(domain.user_encoder, eu_cache, -dtie_u, g.user_encoder);

    ForwardCache em_cache;
    const Matrix X_enc = dense_forward(domain.item_encoder, M, &em_cache);
    Matrix dtie_m;
    dense_term(X, X_enc, terms.item_tie, dtie_m);
    g.d_item_latents += dtie_m;
    backprop_through(domain.item_encoder, em_cache, -dtie_m, g.item_encoder);

    const Matrix B = X * Y.transpose();
    double bilinear_raw = 0.0;
    Matrix dB;
    const double bcount = masked_term(B, R, R_mask, bilinear_raw, dB);
    terms.bilinear = lambda * bilinear_raw;
    if (bcount > 0.0) {
        g.d_item_latents += lambda * (dB * Y);
        g.d_user_latents += lambda * (dB.transpose() * X);
    }

    if (grads) *grads = std::move(g);
    return terms;
}

namespace {

LfacdrDomain make_domain(const RatingMatrix& mat, const LfacdrConfig& cfg,
                         std::mt19937_64& rng) {
    LfacdrDomain d;
    const int item_width = mat.row_width(Axis::Items);  // users per item row
    const int user_width = mat.row_width(Axis::Users);
    d.item_encoder = make_network(encoder_widths(item_width, cfg.encoder_sizes), rng);
    d.item_decoder = make_network(decoder_widths(item_width, cfg.encoder_sizes), rng);
    d.user_encoder = make_network(encoder_widths(user_width, cfg.encoder_sizes), rng);
    d.user_decoder = make_network(decoder_widths(user_width, cfg.encoder_sizes), rng);
    d.item_latents = dense_forward(d.item_encoder, mat.dense(Axis::Items));
    d.user_latents = dense_forward(d.user_encoder, mat.dense(Axis::Users));
    return d;
}

void train_domain(const std::string& stage, LfacdrDomain& domain, const RatingMatrix& ratings,
                  const std::vector<int>& item_rows, const std::vector<int>& user_rows,
                  const LfacdrConfig& cfg, std::mt19937_64& rng, TrainTrace* trace,
                  const ProgressFn& progress) {
    DomainTrainer trainer(domain, ratings, cfg.lambda, cfg.init.l2);
    for (int epoch = 1; epoch <= cfg.init.epochs; ++epoch) {
        auto sched = make_schedule(item_rows, user_rows, cfg.batch_size, rng);
        TermAccum bilinear;
        for (std::size_t s = 0; s < sched.steps(); ++s) {
            const auto stats = trainer.step(sched.items(s), sched.users(s), cfg.init.lr);
            bilinear.add(stats.bilinear_sq, stats.bilinear_count);
        }
        check_domain_finite(domain, stage);
        note_epoch(stage, epoch, cfg.init.epochs, bilinear.rmse(), trace, progress);
    }
}

}  // namespace

LfacdrModel lfacdr_make_model(const TrainViews& views, const LfacdrConfig& cfg) {
    cfg.validate();
    require(views.source && views.target_train, "lfacdr_make_model: null views");
    auto rng = make_rng(cfg.seed, 201);
    LfacdrModel model;
    model.k = cfg.k();
    model.shared_axis = views.axis;
    model.lambda = cfg.lambda;
    model.source = make_domain(*views.source, cfg, rng);
    model.target = make_domain(*views.target_train, cfg, rng);
    model.mapper = make_network(mapper_widths(model.k, cfg.mapper_hidden), rng);
    return model;
}

LfacdrModel lfacdr_init_stage(const TrainViews& views, const LfacdrConfig& cfg,
                              TrainTrace* trace, const ProgressFn& progress) {
    require(views.source && views.target_train, "lfacdr_init_stage: null views");
    require(!views.train_entities.empty(), "lfacdr_init_stage: zero training entities");
    LfacdrModel model = lfacdr_make_model(views, cfg);

    const Axis axis = views.axis;
    const RatingMatrix& src = *views.source;
    const RatingMatrix& tgt = *views.target_train;

    // source domain sees every row; the target's shared axis is restricted to
    // training entities (its test rows are fully masked anyway)
    auto src_rng = make_rng(cfg.seed, 202);
    train_domain("init/source_joint", model.source, src, iota_rows(src.items()),
                 iota_rows(src.users()), cfg, src_rng, trace, progress);

    std::vector<int> tgt_item_rows =
        axis == Axis::Items ? views.train_entities : iota_rows(tgt.items());
    std::vector<int> tgt_user_rows =
        axis == Axis::Users ? views.train_entities : iota_rows(tgt.users());
    auto tgt_rng = make_rng(cfg.seed, 203);
    train_domain("init/target_joint", model.target, tgt, tgt_item_rows, tgt_user_rows, cfg,
                 tgt_rng, trace, progress);

    // mapper between the shared-axis latent rows of the training entities
    const Matrix& src_lat =
        axis == Axis::Items ? model.source.item_latents : model.source.user_latents;
    const Matrix& tgt_lat =
        axis == Axis::Items ? model.target.item_latents : model.target.user_latents;
    const Matrix x = gather_rows(src_lat, views.train_entities);
    const Matrix y = gather_rows(tgt_lat, views.train_entities);

    AdamState map_state = make_adam_state(model.mapper);
    std::vector<ChainPart> chain{{&model.mapper, &map_state, cfg.init.l2}};
    auto map_rng = make_rng(cfg.seed, 204);
    const auto rows = iota_rows(static_cast<int>(x.rows()));
    for (int epoch = 1; epoch <= cfg.init.epochs; ++epoch) {
        TermAccum acc;
        for (const auto& batch : make_batches(rows, cfg.batch_size, map_rng)) {
            const Matrix xb = gather_rows(x, batch);
            const Matrix yb = gather_rows(y, batch);
            const auto stats = chain_step(chain, xb, yb, nullptr, LossKind::DenseMSE, cfg.init.lr);
            acc.add(stats.sq_sum, stats.count);
        }
        check_finite(model.mapper, "init/mapper");
        note_epoch("init/mapper", epoch, cfg.init.epochs, acc.rmse(), trace, progress);
    }
    return model;
}

namespace {

// Shared implementation of the two coupled stages. In item-level mode the
// shared-axis latents are X^s_e and the opposite-axis latents Y^t_e; the
// user-level mirror swaps the roles (X^t_e with F(Y^s_e)).
struct CoupledSetup {
    DenseNetwork* shared_encoder;    // ties the shared-axis latents
    AdamState shared_enc_state;
    Matrix* shared_latents;          // mapped through F in the bilinear term
    AdamMatrixState shared_state;
    const RatingMatrix* shared_mat;  // matrix whose rows tie the shared latents
    Axis shared_orient;

    DenseNetwork* other_encoder;
    AdamState other_enc_state;
    Matrix* other_latents;
    AdamMatrixState other_state;
    const RatingMatrix* other_mat;
    Axis other_orient;
};

// In the shared orientation both scenarios read the same way: the mapped
// shared-axis latents F(.) sit on the rows side of the bilinear product and
// the opposite-axis latents on the columns side. (The user-level objective is
// the transpose of the item-level one.)
void coupled_stage_impl(const std::string& stage, LfacdrModel& model, const TrainViews& views,
                        const LfacdrConfig& cfg, CoupledSetup& su, TrainTrace* trace,
                        const ProgressFn& progress) {
    AdamState map_state = make_adam_state(model.mapper);

    const RatingMatrix& tgt = *views.target_train;
    const std::vector<int> shared_rows = views.train_entities;
    const std::vector<int> other_rows = iota_rows(su.other_mat->axis_rows(su.other_orient));

    auto rng = make_rng(cfg.seed, 205);
    const double lr = cfg.coupled.lr;
    const double l2 = cfg.coupled.l2;

    Matrix shared_vals, shared_mask, other_vals, other_mask;
    for (int epoch = 1; epoch <= cfg.coupled.epochs; ++epoch) {
        auto sched = make_schedule(shared_rows, other_rows, cfg.batch_size, rng);
        TermAccum bilinear;
        for (std::size_t s = 0; s < sched.steps(); ++s) {
            const auto& sb = sched.items(s);   // shared-axis batch
            const auto& ob = sched.users(s);   // opposite-axis batch

            // rating block R^t restricted to (shared batch, other batch)
            tgt.materialize_rows(su.shared_orient, sb, shared_vals, shared_mask);
            const Matrix R_block = gather_cols(shared_vals, ob);
            const Matrix R_mask = gather_cols(shared_mask, ob);

            const Matrix Xs = gather_rows(*su.shared_latents, sb);
            const Matrix Yo = gather_rows(*su.other_latents, ob);

            ForwardCache f_cache;
            const Matrix mapped = dense_forward(model.mapper, Xs, &f_cache);

            const Matrix B = mapped * Yo.transpose();
            double bilinear_raw = 0.0;
            Matrix dB;
            const double bcount = masked_term(B, R_block, R_mask, bilinear_raw, dB);
            bilinear.add(bilinear_raw * (bcount > 0.0 ? bcount : 0.0), bcount);

            Matrix d_mapped = Matrix::Zero(mapped.rows(), mapped.cols());
            Matrix dYo = Matrix::Zero(Yo.rows(), Yo.cols());
            if (bcount > 0.0) {
                d_mapped += dB * Yo;
                dYo += dB.transpose() * mapped;
            }

            Gradients map_grads = zero_gradients(model.mapper);
            Matrix dXs = backprop_through(model.mapper, f_cache, d_mapped, map_grads);

            // tie terms
            su.shared_mat->materialize_rows(su.shared_orient, sb, shared_vals, shared_mask);
            ForwardCache se_cache;
            const Matrix shared_enc = dense_forward(*su.shared_encoder, shared_vals, &se_cache);
            Matrix d_shared_tie;
            double shared_tie = 0.0;
            dense_term(Xs, shared_enc, shared_tie, d_shared_tie);
            dXs += d_shared_tie;
            Gradients shared_enc_grads = zero_gradients(*su.shared_encoder);
            backprop_through(*su.shared_encoder, se_cache, -d_shared_tie, shared_enc_grads);

            su.other_mat->materialize_rows(su.other_orient, ob, other_vals, other_mask);
            ForwardCache oe_cache;
            const Matrix other_enc = dense_forward(*su.other_encoder, other_vals, &oe_cache);
            Matrix d_other_tie;
            double other_tie = 0.0;
            dense_term(Yo, other_enc, other_tie, d_other_tie);
            dYo += d_other_tie;
            Gradients other_enc_grads = zero_gradients(*su.other_encoder);
            backprop_through(*su.other_encoder, oe_cache, -d_other_tie, other_enc_grads);

            add_l2_gradient(model.mapper, l2, map_grads);
            add_l2_gradient(*su.shared_encoder, l2, shared_enc_grads);
            add_l2_gradient(*su.other_encoder, l2, other_enc_grads);

            adam_step(model.mapper, map_grads, map_state, lr);
            adam_step(*su.shared_encoder, shared_enc_grads, su.shared_enc_state, lr);
            adam_step(*su.other_encoder, other_enc_grads, su.other_enc_state, lr);
            adam_step_rows(*su.shared_latents, dXs, sb, su.shared_state, lr, "shared latents");
            adam_step_rows(*su.other_latents, dYo, ob, su.other_state, lr, "other latents");
        }
        check_finite(model.mapper, stage);
        check_finite(*su.shared_encoder, stage);
        check_finite(*su.other_encoder, stage);
        note_epoch(stage, epoch, cfg.coupled.epochs, bilinear.rmse(), trace, progress);
    }
}

}  // namespace

void lfacdr_coupled_stage_items(LfacdrModel& model, const TrainViews& views,
                                const LfacdrConfig& cfg, TrainTrace* trace,
                                const ProgressFn& progress) {
    require(model.shared_axis == Axis::Items && views.axis == Axis::Items,
            "lfacdr_coupled_stage_items: model/views are not in Items mode");
    cfg.validate();

    CoupledSetup su{
        &model.source.item_encoder, make_adam_state(model.source.item_encoder),
        &model.source.item_latents, make_adam_state(model.source.item_latents),
        views.source,               Axis::Items,
        &model.target.user_encoder, make_adam_state(model.target.user_encoder),
        &model.target.user_latents, make_adam_state(model.target.user_latents),
        views.target_train,         Axis::Users,
    };
    coupled_stage_impl("coupled", model, views, cfg, su, trace,
                       progress);
}

void lfacdr_coupled_stage_users(LfacdrModel& model, const TrainViews& views,
                                const LfacdrConfig& cfg, TrainTrace* trace,
                                const ProgressFn& progress) {
    require(model.shared_axis == Axis::Users && views.axis == Axis::Users,
            "lfacdr_coupled_stage_users: model/views are not in Users mode");
    cfg.validate();

    CoupledSetup su{
        &model.source.user_encoder, make_adam_state(model.source.user_encoder),
        &model.source.user_latents, make_adam_state(model.source.user_latents),
        views.source,               Axis::Users,
        &model.target.item_encoder, make_adam_state(model.target.item_encoder),
        &model.target.item_latents, make_adam_state(model.target.item_latents),
        views.target_train,         Axis::Items,
    };
    coupled_stage_impl("coupled", model, views, cfg, su, trace,
                       progress);
}

void lfacdr_coupled_stage(LfacdrModel& model, const TrainViews& views, const LfacdrConfig& cfg,
                          TrainTrace* trace, const ProgressFn& progress) {
    if (model.shared_axis == Axis::Items) {
        lfacdr_coupled_stage_items(model, views, cfg, trace, progress);
    } else {
        lfacdr_coupled_stage_users(model, views, cfg, trace, progress);
    }
}

Matrix lfacdr_predict_items(const LfacdrModel& model, const Matrix& source_item_rows) {
    require(model.shared_axis == Axis::Items, "lfacdr_predict_items: model is in Users mode");
    const Matrix latents = chain_forward({&model.source.item_encoder, &model.mapper},
                                         source_item_rows);
    const Matrix out = latents * model.target.user_latents.transpose();
    return out.cwiseMax(0.0).cwiseMin(1.0);
}

Matrix lfacdr_predict_users(const LfacdrModel& model, const Matrix& source_user_rows) {
    require(model.shared_axis == Axis::Users, "lfacdr_predict_users: model is in Items mode");
    const Matrix latents = chain_forward({&model.source.user_encoder, &model.mapper},
                                         source_user_rows);
    const Matrix out = latents * model.target.item_latents.transpose();
    return out.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace cdrec
