#pragma once

#include "cdrec/numerics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

// Rating-log ingestion, normalization, cross-domain alignment, cold-start
// splitting and synthetic coupled-domain generation. A RatingMatrix is a
// sparse store; 0 is reserved to mean "unobserved", so every stored rating
// is strictly positive.

namespace cdrec {

enum class Axis { Items, Users };

const char* axis_name(Axis axis);
Axis axis_from_name(const std::string& name);

struct RatingEntry {
    int item = 0;
    int user = 0;
    double value = 0.0;
};

class RatingMatrix {
public:
    RatingMatrix() = default;
    RatingMatrix(int items, int users, std::vector<RatingEntry> entries);

    int items() const { return items_; }
    int users() const { return users_; }
    std::size_t observed() const { return entries_.size(); }
    double sparsity() const;
    const std::vector<RatingEntry>& entries() const { return entries_; }

    /// Number of rows in the given orientation (M: items, U: users).
    int axis_rows(Axis axis) const { return axis == Axis::Items ? items_ : users_; }
    /// Width of a row in the given orientation.
    int row_width(Axis axis) const { return axis == Axis::Items ? users_ : items_; }

    std::size_t row_observed(Axis axis, int row) const;

    /// Materializes the requested rows of the M (items x users) or U = R^T
    /// (users x items) orientation as dense values + observation mask.
    void materialize_rows(Axis axis, const std::vector<int>& rows, Matrix& values,
                          Matrix& mask) const;

    Matrix dense(Axis axis) const;
    Matrix dense_mask(Axis axis) const;

private:
    int items_ = 0;
    int users_ = 0;
    std::vector<RatingEntry> entries_;       // sorted by (item, user)
    std::vector<std::size_t> item_offsets_;  // CSR offsets over entries_
    std::vector<std::uint32_t> by_user_;     // permutation of entries_ sorted by (user, item)
    std::vector<std::size_t> user_offsets_;
};

/// r / r_max; throws if r <= 0 (0 is the missing-value sentinel) or r > r_max.
double normalize_rating(double r, double r_max);
double denormalize_rating(double v, double r_max);

struct IdMap {
    std::vector<std::string> ids;  // index -> raw id, in order of first appearance
    std::unordered_map<std::string, int> index;
};

struct IngestOptions {
    char delimiter = ',';
    double r_max = 5.0;
    int min_user_interactions = 1;  // paper protocol uses 5; see CLI defaults
};

struct IngestResult {
    RatingMatrix matrix;
    IdMap users;
    IdMap items;
    std::size_t lines_read = 0;
    std::size_t duplicates = 0;   // (user,item) pairs collapsed, keeping the last
    std::size_t users_filtered = 0;
};

/// Parses `user_id<delim>item_id<delim>rating[<delim>timestamp]` lines.
/// A header line is auto-detected by a non-numeric first field. Ratings are
/// normalized to (0,1] by r_max. Malformed lines raise with their line number.
IngestResult ingest_ratings(const std::string& path, const IngestOptions& opt = {});

struct DomainPair {
    RatingMatrix source;
    RatingMatrix target;
    Axis shared_axis = Axis::Items;
    /// Aligned (source index, target index) pairs along the shared axis.
    std::vector<std::pair<int, int>> shared_ids;

    int shared_count() const { return static_cast<int>(shared_ids.size()); }
};

/// Pairs two matrices that are already index-aligned on the shared axis.
DomainPair make_domain_pair(RatingMatrix source, RatingMatrix target, Axis axis);

/// Builds an aligned pair from two ingested domains and a two-column
/// alignment file (source_entity_id<delim>target_entity_id). Both matrices
/// are reindexed so shared entities occupy the same leading indices.
DomainPair align_domains(const IngestResult& source, const IngestResult& target,
                         const std::string& alignment_path, Axis axis, char delimiter = ',');

struct SplitPlan {
    std::vector<int> train;  // sorted shared-axis indices
    std::vector<int> test;
    double ratio = 0.8;
    std::uint64_t seed = 0;
    int repeat = 0;
};

/// `repeats` independent 80/20-style permutation splits of the shared axis,
/// each seeded by (seed, repeat id). |train| = round(ratio * total).
std::vector<SplitPlan> make_splits(const DomainPair& pair, double ratio, int repeats,
                                   std::uint64_t seed);

struct ColdStartSplit {
    RatingMatrix target_train;  // test entities fully zeroed
    RatingMatrix target_test;   // held-out ratings of the test entities
};

/// Removes every target-domain rating of the test entities from the training
/// view and keeps them as ground truth. The source domain is never masked.
ColdStartSplit apply_cold_start(const DomainPair& pair, const SplitPlan& plan);

enum class MapKind { Identity, Linear, MlpRandom };

const char* map_kind_name(MapKind kind);
MapKind map_kind_from_name(const std::string& name);

struct SyntheticSpec {
    int m = 200;
    int n = 300;
    int true_rank = 8;
    double noise_sigma = 0.02;
    double source_sparsity = 0.90;
    double target_sparsity = 0.95;
    MapKind map = MapKind::MlpRandom;
    std::uint64_t seed = 42;
    Axis shared_axis = Axis::Items;
};

/// The pinned reference configuration the acceptance thresholds were frozen
/// against (also shipped as configs/reference-synthetic.json).
SyntheticSpec reference_synthetic_spec();

struct SyntheticData {
    DomainPair pair;
    SyntheticSpec spec;
    Matrix source_item_latents;  // m x k*
    Matrix source_user_latents;  // n x k*
    Matrix target_item_latents;
    Matrix target_user_latents;
};

/// Draws ground-truth latents, maps them across domains with the configured
/// map, forms ratings clamp(A B^T + noise) and observes cells by
/// Bernoulli(1 - sparsity), re-drawing any row/column left empty (error after
/// 100 attempts). Deterministic in the spec seed.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Directory layout: source.csv, target.csv (user_id,item_id,rating on the
/// normalized scale) and truth.json (spec echo + ground-truth latents).
void save_synthetic(const std::string& dir, const SyntheticData& data);
SyntheticData load_synthetic(const std::string& dir);

/// I/O failures distinguished from usage/numerical errors for CLI exit codes.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cdrec
