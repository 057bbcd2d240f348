#pragma once

#include "cdrec/train.hpp"

// LFACDR: per domain, an item autoencoder and a user autoencoder tied to
// explicit trainable latent-factor matrices X_e (items x k) and Y_e
// (users x k), with a lambda-weighted bilinear term pulling X_e Y_e^T toward
// the rating matrix. A k -> k mapper transfers the shared-axis latents across
// domains; ratings are predicted by dot products of mapped latents.

namespace cdrec {

struct LfacdrConfig {
    std::vector<int> encoder_sizes = {512, 256, 128};
    std::vector<int> mapper_hidden = {256};
    int batch_size = 500;
    double lambda = 1.0;
    StageConfig init{250, 1e-3, 1e-5};
    StageConfig coupled{300, 1e-5, 1e-5};
    std::uint64_t seed = 0;

    int k() const { return encoder_sizes.back(); }
    void validate() const;
};

struct LfacdrDomain {
    DenseNetwork item_encoder, item_decoder;  // E_m: width(M row) -> k, D_m mirrors
    DenseNetwork user_encoder, user_decoder;  // E_u: width(U row) -> k, D_u mirrors
    Matrix item_latents;  // X_e, items x k
    Matrix user_latents;  // Y_e, users x k
};

struct LfacdrModel {
    LfacdrDomain source, target;
    DenseNetwork mapper;  // k -> k
    int k = 0;
    Axis shared_axis = Axis::Items;
    double lambda = 1.0;
};

struct JointLossTerms {
    double item_recon = 0.0;  // masked ||M - D_m(X_e)||^2
    double user_recon = 0.0;  // masked ||U - D_u(Y_e)||^2
    double user_tie = 0.0;    // dense  ||Y_e - E_u(U)||^2
    double item_tie = 0.0;    // dense  ||X_e - E_m(M)||^2
    double bilinear = 0.0;    // lambda * masked ||X_e Y_e^T - R||^2

    double total() const { return item_recon + user_recon + user_tie + item_tie + bilinear; }
};

struct LfacdrDomainGrads {
    Gradients item_encoder, item_decoder, user_encoder, user_decoder;
    Matrix d_item_latents, d_user_latents;
};

/// The five-term joint objective of one domain (each term a mean over its
/// cells), with gradients flowing to all four networks and both free latent
/// matrices. Masked terms with an empty mask contribute zero.
JointLossTerms joint_latent_loss(const LfacdrDomain& domain, const Matrix& M,
                                 const Matrix& M_mask, const Matrix& U, const Matrix& U_mask,
                                 const Matrix& R, const Matrix& R_mask, double lambda,
                                 LfacdrDomainGrads* grads = nullptr);

/// Seeded construction: networks initialized, latents set to the encoder
/// outputs of the given matrices (the epochs=0 state of the init stage).
LfacdrModel lfacdr_make_model(const TrainViews& views, const LfacdrConfig& cfg);

/// Stage A: trains each domain on the joint latent objective (latents start
/// at the encoder outputs and are then free variables), source first, then
/// the mapper on dense MSE between shared-axis latents of training entities.
LfacdrModel lfacdr_init_stage(const TrainViews& views, const LfacdrConfig& cfg,
                              TrainTrace* trace = nullptr, const ProgressFn& progress = {});

/// Stage B, item-level: jointly optimizes F, the source item encoder, the
/// target user encoder and the latents X_e^s, Y_e^t on
/// masked ||R^t - F(X^s_e) (Y^t_e)^T||^2 plus the two encoder tie terms.
/// Everything else is frozen. Throws if the model is in Users mode.
void lfacdr_coupled_stage_items(LfacdrModel& model, const TrainViews& views,
                                const LfacdrConfig& cfg, TrainTrace* trace = nullptr,
                                const ProgressFn& progress = {});

/// Stage B, user-level mirror: active parts are F, the target item encoder,
/// the source user encoder and the latents X_e^t, Y_e^s.
void lfacdr_coupled_stage_users(LfacdrModel& model, const TrainViews& views,
                                const LfacdrConfig& cfg, TrainTrace* trace = nullptr,
                                const ProgressFn& progress = {});

/// Dispatches to the coupled stage matching the model's shared axis.
void lfacdr_coupled_stage(LfacdrModel& model, const TrainViews& views, const LfacdrConfig& cfg,
                          TrainTrace* trace = nullptr, const ProgressFn& progress = {});

/// R-hat rows for source item rows: clamp01(F(E^s_m(row)) (Y^t_e)^T).
Matrix lfacdr_predict_items(const LfacdrModel& model, const Matrix& source_item_rows);

/// Predictions for source user rows, one row per user over the target items:
/// clamp01(F(E^s_u(row)) (X^t_e)^T).
Matrix lfacdr_predict_users(const LfacdrModel& model, const Matrix& source_user_rows);

}  // namespace cdrec
