#include "cdrec/data.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cdrec {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

json matrix_to_json(const Matrix& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw IoError("matrix_from_json: data length mismatch");
    Matrix m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[static_cast<std::size_t>(k++)];
    return m;
}

}  // namespace

const char* axis_name(Axis axis) { return axis == Axis::Items ? "items" : "users"; }

Axis axis_from_name(const std::string& name) {
    if (name == "items") return Axis::Items;
    if (name == "users") return Axis::Users;
    throw std::invalid_argument("unknown axis: " + name);
}

const char* map_kind_name(MapKind kind) {
    switch (kind) {
        case MapKind::Identity: return "identity";
        case MapKind::Linear: return "linear";
        case MapKind::MlpRandom: return "mlp";
    }
    return "mlp";
}

MapKind map_kind_from_name(const std::string& name) {
    if (name == "identity") return MapKind::Identity;
    if (name == "linear") return MapKind::Linear;
    if (name == "mlp") return MapKind::MlpRandom;
    throw std::invalid_argument("unknown cross-domain map: " + name);
}

RatingMatrix::RatingMatrix(int items, int users, std::vector<RatingEntry> entries)
    : items_(items), users_(users), entries_(std::move(entries)) {
    require(items_ >= 1 && users_ >= 1, "RatingMatrix: dimensions must be >= 1");
    for (const auto& e : entries_) {
        require(e.item >= 0 && e.item < items_ && e.user >= 0 && e.user < users_,
                "RatingMatrix: entry index out of bounds");
        require(e.value > 0.0 && e.value <= 1.0,
                "RatingMatrix: ratings must lie in (0,1]; 0 means unobserved");
    }
    std::sort(entries_.begin(), entries_.end(), [](const RatingEntry& a, const RatingEntry& b) {
        return a.item != b.item ? a.item < b.item : a.user < b.user;
    });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        require(entries_[i - 1].item != entries_[i].item || entries_[i - 1].user != entries_[i].user,
                "RatingMatrix: duplicate (item,user) pair");
    }

    item_offsets_.assign(static_cast<std::size_t>(items_) + 1, 0);
    for (const auto& e : entries_) item_offsets_[static_cast<std::size_t>(e.item) + 1]++;
    for (std::size_t i = 1; i < item_offsets_.size(); ++i) item_offsets_[i] += item_offsets_[i - 1];

    by_user_.resize(entries_.size());
    for (std::uint32_t i = 0; i < by_user_.size(); ++i) by_user_[i] = i;
    std::sort(by_user_.begin(), by_user_.end(), [&](std::uint32_t a, std::uint32_t b) {
        const auto& ea = entries_[a];
        const auto& eb = entries_[b];
        return ea.user != eb.user ? ea.user < eb.user : ea.item < eb.item;
    });
    user_offsets_.assign(static_cast<std::size_t>(users_) + 1, 0);
    for (const auto& e : entries_) user_offsets_[static_cast<std::size_t>(e.user) + 1]++;
    for (std::size_t i = 1; i < user_offsets_.size(); ++i) user_offsets_[i] += user_offsets_[i - 1];
}

double RatingMatrix::sparsity() const {
    const double cells = static_cast<double>(items_) * static_cast<double>(users_);
    return cells == 0.0 ? 0.0 : 1.0 - static_cast<double>(entries_.size()) / cells;
}

std::size_t RatingMatrix::row_observed(Axis axis, int row) const {
    if (axis == Axis::Items) {
        require(row >= 0 && row < items_, "row_observed: item index out of range");
        return item_offsets_[static_cast<std::size_t>(row) + 1] -
               item_offsets_[static_cast<std::size_t>(row)];
    }
    require(row >= 0 && row < users_, "row_observed: user index out of range");
    return user_offsets_[static_cast<std::size_t>(row) + 1] -
           user_offsets_[static_cast<std::size_t>(row)];
}

void RatingMatrix::materialize_rows(Axis axis, const std::vector<int>& rows, Matrix& values,
                                    Matrix& mask) const {
    const int width = row_width(axis);
    values = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), width);
    mask = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), width);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int row = rows[r];
        if (axis == Axis::Items) {
            require(row >= 0 && row < items_, "materialize_rows: item index out of range");
            for (std::size_t k = item_offsets_[static_cast<std::size_t>(row)];
                 k < item_offsets_[static_cast<std::size_t>(row) + 1]; ++k) {
                values(static_cast<Eigen::Index>(r), entries_[k].user) = entries_[k].value;
                mask(static_cast<Eigen::Index>(r), entries_[k].user) = 1.0;
            }
        } else {
            require(row >= 0 && row < users_, "materialize_rows: user index out of range");
            for (std::size_t k = user_offsets_[static_cast<std::size_t>(row)];
                 k < user_offsets_[static_cast<std::size_t>(row) + 1]; ++k) {
                const auto& e = entries_[by_user_[k]];
                values(static_cast<Eigen::Index>(r), e.item) = e.value;
                mask(static_cast<Eigen::Index>(r), e.item) = 1.0;
            }
        }
    }
}

Matrix RatingMatrix::dense(Axis axis) const {
    std::vector<int> rows(static_cast<std::size_t>(axis_rows(axis)));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    Matrix values, mask;
    materialize_rows(axis, rows, values, mask);
    return values;
}

Matrix RatingMatrix::dense_mask(Axis axis) const {
    std::vector<int> rows(static_cast<std::size_t>(axis_rows(axis)));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    Matrix values, mask;
    materialize_rows(axis, rows, values, mask);
    return mask;
}

double normalize_rating(double r, double r_max) {
    require(r_max > 0.0, "normalize_rating: r_max must be > 0");
    if (r <= 0.0)
        throw std::invalid_argument("normalize_rating: rating must be > 0 (0 is the missing sentinel)");
    if (r > r_max) throw std::invalid_argument("normalize_rating: rating above declared maximum");
    return r / r_max;
}

double denormalize_rating(double v, double r_max) { return v * r_max; }

IngestResult ingest_ratings(const std::string& path, const IngestOptions& opt) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open rating file: " + path);

    struct PairHash {
        std::size_t operator()(const std::pair<int, int>& p) const {
            return std::hash<long long>()((static_cast<long long>(p.first) << 32) ^
                                          static_cast<unsigned>(p.second));
        }
    };

    // raw id -> dense parse index, in order of first appearance
    std::unordered_map<std::string, int> user_ix, item_ix;
    std::vector<std::string> user_ids, item_ids;
    std::unordered_map<std::pair<int, int>, double, PairHash> last_value;
    std::vector<std::pair<int, int>> first_seen;  // (user, item) in first-appearance order

    IngestResult out;
    std::string line;
    std::size_t line_no = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        auto fields = split_fields(t, opt.delimiter);
        if (fields.size() < 3 || fields.size() > 4) {
            throw IoError("line " + std::to_string(line_no) + ": expected 3 or 4 fields, got " +
                          std::to_string(fields.size()));
        }
        double raw = 0.0;
        if (!parse_double(fields[2], raw)) {
            double probe;
            // header detection: first line whose first field is non-numeric
            if (first_data_line && !parse_double(fields[0], probe)) {
                first_data_line = false;
                continue;
            }
            throw IoError("line " + std::to_string(line_no) + ": malformed rating field '" +
                          trim(fields[2]) + "'");
        }
        first_data_line = false;
        double value;
        try {
            value = normalize_rating(raw, opt.r_max);
        } catch (const std::invalid_argument& e) {
            throw IoError("line " + std::to_string(line_no) + ": " + e.what());
        }
        const std::string user_raw = trim(fields[0]);
        const std::string item_raw = trim(fields[1]);
        if (user_raw.empty() || item_raw.empty()) {
            throw IoError("line " + std::to_string(line_no) + ": empty id field");
        }

        auto [uit, u_new] = user_ix.try_emplace(user_raw, static_cast<int>(user_ids.size()));
        if (u_new) user_ids.push_back(user_raw);
        auto [iit, i_new] = item_ix.try_emplace(item_raw, static_cast<int>(item_ids.size()));
        if (i_new) item_ids.push_back(item_raw);

        const std::pair<int, int> key{uit->second, iit->second};
        auto [vit, inserted] = last_value.try_emplace(key, value);
        if (!inserted) {
            vit->second = value;  // duplicates keep the last occurrence
            out.duplicates++;
        } else {
            first_seen.push_back(key);
        }
    }
    if (first_seen.empty()) throw IoError("no ratings in file: " + path);

    // minimum-interaction filter over users
    std::vector<int> user_count(user_ids.size(), 0);
    for (const auto& key : first_seen) user_count[static_cast<std::size_t>(key.first)]++;
    std::vector<bool> user_kept(user_ids.size(), false);
    for (std::size_t u = 0; u < user_ids.size(); ++u) {
        user_kept[u] = user_count[u] >= opt.min_user_interactions;
        if (!user_kept[u]) out.users_filtered++;
    }

    // final contiguous indices in first-appearance order over surviving records
    IdMap users, items;
    std::vector<RatingEntry> entries;
    for (const auto& key : first_seen) {
        if (!user_kept[static_cast<std::size_t>(key.first)]) continue;
        const std::string& user_raw = user_ids[static_cast<std::size_t>(key.first)];
        const std::string& item_raw = item_ids[static_cast<std::size_t>(key.second)];
        auto [uit, u_new] = users.index.try_emplace(user_raw, static_cast<int>(users.ids.size()));
        if (u_new) users.ids.push_back(user_raw);
        auto [iit, i_new] = items.index.try_emplace(item_raw, static_cast<int>(items.ids.size()));
        if (i_new) items.ids.push_back(item_raw);
        entries.push_back({iit->second, uit->second, last_value.at(key)});
    }
    if (entries.empty()) throw IoError("no ratings left after the minimum-interaction filter");

    out.lines_read = line_no;
    out.users = std::move(users);
    out.items = std::move(items);
    out.matrix = RatingMatrix(static_cast<int>(out.items.ids.size()),
                              static_cast<int>(out.users.ids.size()), std::move(entries));
    return out;
}

DomainPair make_domain_pair(RatingMatrix source, RatingMatrix target, Axis axis) {
    const int s = axis == Axis::Items ? source.items() : source.users();
    const int t = axis == Axis::Items ? target.items() : target.users();
    require(s == t, "make_domain_pair: shared-axis sizes differ");
    DomainPair pair;
    pair.source = std::move(source);
    pair.target = std::move(target);
    pair.shared_axis = axis;
    pair.shared_ids.reserve(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) pair.shared_ids.emplace_back(i, i);
    return pair;
}

namespace {

// Keeps only the listed shared-axis entities, renumbering them 0..S-1.
RatingMatrix reindex_shared(const RatingMatrix& mat, Axis axis, const std::vector<int>& keep) {
    std::vector<int> remap(static_cast<std::size_t>(mat.axis_rows(axis)), -1);
    for (std::size_t i = 0; i < keep.size(); ++i) remap[static_cast<std::size_t>(keep[i])] =
        static_cast<int>(i);
    std::vector<RatingEntry> entries;
    for (const auto& e : mat.entries()) {
        const int shared = axis == Axis::Items ? e.item : e.user;
        const int ni = remap[static_cast<std::size_t>(shared)];
        if (ni < 0) continue;
        RatingEntry ne = e;
        (axis == Axis::Items ? ne.item : ne.user) = ni;
        entries.push_back(ne);
    }
    const int s = static_cast<int>(keep.size());
    const int items = axis == Axis::Items ? s : mat.items();
    const int users = axis == Axis::Items ? mat.users() : s;
    return RatingMatrix(items, users, std::move(entries));
}

}  // namespace

DomainPair align_domains(const IngestResult& source, const IngestResult& target,
                         const std::string& alignment_path, Axis axis, char delimiter) {
    std::ifstream in(alignment_path);
    if (!in) throw IoError("cannot open alignment file: " + alignment_path);
    const IdMap& src_map = axis == Axis::Items ? source.items : source.users;
    const IdMap& tgt_map = axis == Axis::Items ? target.items : target.users;

    std::vector<int> src_keep, tgt_keep;
    std::vector<bool> src_used(src_map.ids.size(), false), tgt_used(tgt_map.ids.size(), false);
    std::string line;
    std::size_t line_no = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        auto fields = split_fields(t, delimiter);
        if (fields.size() != 2)
            throw IoError("alignment line " + std::to_string(line_no) + ": expected 2 fields");
        const std::string sid = trim(fields[0]);
        const std::string tid = trim(fields[1]);
        auto sit = src_map.index.find(sid);
        auto tit = tgt_map.index.find(tid);
        if (sit == src_map.index.end() || tit == tgt_map.index.end()) {
            double probe;
            if (first_data_line && !parse_double(fields[0], probe) &&
                sit == src_map.index.end()) {
                first_data_line = false;
                continue;  // header
            }
            first_data_line = false;
            continue;  // entity absent from one of the domains
        }
        first_data_line = false;
        if (src_used[static_cast<std::size_t>(sit->second)] ||
            tgt_used[static_cast<std::size_t>(tit->second)])
            continue;  // repeated alignment row; first one wins
        src_used[static_cast<std::size_t>(sit->second)] = true;
        tgt_used[static_cast<std::size_t>(tit->second)] = true;
        src_keep.push_back(sit->second);
        tgt_keep.push_back(tit->second);
    }
    if (src_keep.size() < 2) throw IoError("alignment yields fewer than 2 shared entities");

    DomainPair pair;
    pair.source = reindex_shared(source.matrix, axis, src_keep);
    pair.target = reindex_shared(target.matrix, axis, tgt_keep);
    pair.shared_axis = axis;
    for (std::size_t i = 0; i < src_keep.size(); ++i)
        pair.shared_ids.emplace_back(static_cast<int>(i), static_cast<int>(i));
    return pair;
}

std::vector<SplitPlan> make_splits(const DomainPair& pair, double ratio, int repeats,
                                   std::uint64_t seed) {
    require(ratio > 0.0 && ratio < 1.0, "make_splits: ratio must lie in (0,1)");
    require(repeats >= 1, "make_splits: repeats must be >= 1");
    const int total = pair.shared_count();
    if (total < 2) throw std::invalid_argument("make_splits: fewer than 2 shared entities");

    std::vector<SplitPlan> plans;
    plans.reserve(static_cast<std::size_t>(repeats));
    for (int rep = 0; rep < repeats; ++rep) {
        std::vector<int> perm(static_cast<std::size_t>(total));
        for (int i = 0; i < total; ++i) perm[static_cast<std::size_t>(i)] = i;
        auto rng = make_rng(seed, 0x5517ULL + static_cast<std::uint64_t>(rep), 1);
        std::shuffle(perm.begin(), perm.end(), rng);
        long n_train = std::lround(ratio * total);
        n_train = std::clamp<long>(n_train, 1, total - 1);  // keep both sides non-empty
        SplitPlan plan;
        plan.ratio = ratio;
        plan.seed = seed;
        plan.repeat = rep;
        plan.train.assign(perm.begin(), perm.begin() + n_train);
        plan.test.assign(perm.begin() + n_train, perm.end());
        std::sort(plan.train.begin(), plan.train.end());
        std::sort(plan.test.begin(), plan.test.end());
        plans.push_back(std::move(plan));
    }
    return plans;
}

ColdStartSplit apply_cold_start(const DomainPair& pair, const SplitPlan& plan) {
    const int total = pair.shared_count();
    std::vector<bool> is_test(static_cast<std::size_t>(total), false);
    for (int ix : plan.test) {
        require(ix >= 0 && ix < total, "apply_cold_start: test index out of range");
        is_test[static_cast<std::size_t>(ix)] = true;
    }
    for (int ix : plan.train)
        require(ix >= 0 && ix < total, "apply_cold_start: train index out of range");

    std::vector<RatingEntry> train_entries, test_entries;
    for (const auto& e : pair.target.entries()) {
        const int shared = pair.shared_axis == Axis::Items ? e.item : e.user;
        if (is_test[static_cast<std::size_t>(shared)]) {
            test_entries.push_back(e);
        } else {
            train_entries.push_back(e);
        }
    }
    ColdStartSplit split;
    split.target_train =
        RatingMatrix(pair.target.items(), pair.target.users(), std::move(train_entries));
    split.target_test =
        RatingMatrix(pair.target.items(), pair.target.users(), std::move(test_entries));
    return split;
}

SyntheticSpec reference_synthetic_spec() { return SyntheticSpec{}; }

namespace {

Matrix uniform_matrix(int rows, int cols, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return Matrix::NullaryExpr(rows, cols, [&]() { return dist(rng); });
}

Matrix apply_cross_domain_map(const Matrix& latents, MapKind kind, std::mt19937_64& rng) {
    const int k = static_cast<int>(latents.cols());
    switch (kind) {
        case MapKind::Identity:
            return latents;
        case MapKind::Linear: {
            // mild random mixing around the identity keeps latents in range
            Matrix g = Matrix::Identity(k, k) + uniform_matrix(k, k, -0.25, 0.25, rng);
            return latents * g.transpose();
        }
        case MapKind::MlpRandom: {
            std::vector<int> widths{k, k, k};
            DenseNetwork g = make_network(widths, rng);
            Matrix mapped = dense_forward(g, latents);
            // rescale so the target ratings keep the source's overall level
            const double src_mean = latents.mean();
            const double dst_mean = mapped.mean();
            if (dst_mean > 1e-12) mapped *= src_mean / dst_mean;
            return mapped;
        }
    }
    return latents;
}

// Bernoulli observation mask with every row re-drawn until it has >= 1 cell.
std::vector<std::vector<bool>> sample_mask(int rows, int cols, double sparsity,
                                           std::mt19937_64& rng) {
    std::bernoulli_distribution keep(1.0 - sparsity);
    std::vector<std::vector<bool>> mask(static_cast<std::size_t>(rows),
                                        std::vector<bool>(static_cast<std::size_t>(cols), false));
    for (int r = 0; r < rows; ++r) {
        bool any = false;
        for (int attempt = 0; attempt < 100 && !any; ++attempt) {
            for (int c = 0; c < cols; ++c) {
                const bool v = keep(rng);
                mask[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = v;
                any = any || v;
            }
        }
        if (!any)
            throw std::runtime_error(
                "generate_synthetic: sparsity too high, an entity has no observation after "
                "100 re-draws");
    }
    // guarantee the other axis is covered too: force one cell per empty column
    for (int c = 0; c < cols; ++c) {
        bool any = false;
        for (int r = 0; r < rows && !any; ++r) any = mask[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        if (!any) {
            std::uniform_int_distribution<int> pick(0, rows - 1);
            mask[static_cast<std::size_t>(pick(rng))][static_cast<std::size_t>(c)] = true;
        }
    }
    return mask;
}

constexpr double kMinObservedRating = 1e-3;  // keeps stored ratings off the 0 sentinel

std::vector<RatingEntry> observe(const Matrix& values, const std::vector<std::vector<bool>>& mask,
                                 Axis axis) {
    // values rows are shared-axis entities
    std::vector<RatingEntry> entries;
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (!mask[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) continue;
            const double v = std::clamp(values(r, c), kMinObservedRating, 1.0);
            if (axis == Axis::Items) {
                entries.push_back({static_cast<int>(r), static_cast<int>(c), v});
            } else {
                entries.push_back({static_cast<int>(c), static_cast<int>(r), v});
            }
        }
    }
    return entries;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    require(spec.m >= 2 && spec.n >= 2, "generate_synthetic: m and n must be >= 2");
    require(spec.true_rank >= 1 && spec.true_rank <= std::min(spec.m, spec.n),
            "generate_synthetic: 0 < k* <= min(m,n)");
    require(spec.noise_sigma >= 0.0, "generate_synthetic: noise must be >= 0");
    require(spec.source_sparsity >= 0.0 && spec.source_sparsity < 1.0 &&
                spec.target_sparsity >= 0.0 && spec.target_sparsity < 1.0,
            "generate_synthetic: sparsity must lie in [0,1)");

    const int shared = spec.shared_axis == Axis::Items ? spec.m : spec.n;
    const int other = spec.shared_axis == Axis::Items ? spec.n : spec.m;
    const int k = spec.true_rank;
    // entry scale sqrt(2/k) puts rating dot products around 0.5
    const double scale = std::sqrt(2.0 / k);

    auto rng = make_rng(spec.seed, 0x5e3dULL, 7);
    const Matrix shared_lat = uniform_matrix(shared, k, 0.0, scale, rng);
    const Matrix other_src = uniform_matrix(other, k, 0.0, scale, rng);
    const Matrix other_tgt = uniform_matrix(other, k, 0.0, scale, rng);
    const Matrix shared_tgt = apply_cross_domain_map(shared_lat, spec.map, rng);

    auto make_values = [&](const Matrix& a, const Matrix& b) {
        Matrix v = a * b.transpose();  // shared x other
        if (spec.noise_sigma > 0.0) {
            std::normal_distribution<double> noise(0.0, spec.noise_sigma);
            v = v.unaryExpr([&](double x) { return x + noise(rng); });
        }
        return v;
    };
    const Matrix src_values = make_values(shared_lat, other_src);
    const Matrix tgt_values = make_values(shared_tgt, other_tgt);

    const auto src_mask = sample_mask(shared, other, spec.source_sparsity, rng);
    const auto tgt_mask = sample_mask(shared, other, spec.target_sparsity, rng);

    const int items = spec.m;
    const int users = spec.n;
    RatingMatrix source(items, users, observe(src_values, src_mask, spec.shared_axis));
    RatingMatrix target(items, users, observe(tgt_values, tgt_mask, spec.shared_axis));

    SyntheticData data;
    data.pair = make_domain_pair(std::move(source), std::move(target), spec.shared_axis);
    data.spec = spec;
    if (spec.shared_axis == Axis::Items) {
        data.source_item_latents = shared_lat;
        data.target_item_latents = shared_tgt;
        data.source_user_latents = other_src;
        data.target_user_latents = other_tgt;
    } else {
        data.source_user_latents = shared_lat;
        data.target_user_latents = shared_tgt;
        data.source_item_latents = other_src;
        data.target_item_latents = other_tgt;
    }
    return data;
}

namespace {

json spec_to_json(const SyntheticSpec& spec) {
    return json{{"m", spec.m},
                {"n", spec.n},
                {"true_rank", spec.true_rank},
                {"noise_sigma", spec.noise_sigma},
                {"source_sparsity", spec.source_sparsity},
                {"target_sparsity", spec.target_sparsity},
                {"map", map_kind_name(spec.map)},
                {"seed", spec.seed},
                {"shared_axis", axis_name(spec.shared_axis)}};
}

SyntheticSpec spec_from_json(const json& j) {
    SyntheticSpec spec;
    spec.m = j.at("m").get<int>();
    spec.n = j.at("n").get<int>();
    spec.true_rank = j.at("true_rank").get<int>();
    spec.noise_sigma = j.at("noise_sigma").get<double>();
    spec.source_sparsity = j.at("source_sparsity").get<double>();
    spec.target_sparsity = j.at("target_sparsity").get<double>();
    spec.map = map_kind_from_name(j.at("map").get<std::string>());
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.shared_axis = axis_from_name(j.at("shared_axis").get<std::string>());
    return spec;
}

void write_ratings_csv(const std::string& path, const RatingMatrix& mat) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write " + path);
    std::fputs("user_id,item_id,rating\n", f);
    for (const auto& e : mat.entries()) {
        std::fprintf(f, "%d,%d,%.17g\n", e.user, e.item, e.value);
    }
    std::fclose(f);
}

RatingMatrix read_ratings_csv(const std::string& path, int items, int users) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<RatingEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || line_no == 1) continue;  // header
        auto fields = split_fields(t, ',');
        if (fields.size() != 3)
            throw IoError(path + " line " + std::to_string(line_no) + ": expected 3 fields");
        double u, i, v;
        if (!parse_double(fields[0], u) || !parse_double(fields[1], i) ||
            !parse_double(fields[2], v))
            throw IoError(path + " line " + std::to_string(line_no) + ": malformed field");
        entries.push_back({static_cast<int>(i), static_cast<int>(u), v});
    }
    return RatingMatrix(items, users, std::move(entries));
}

}  // namespace

void save_synthetic(const std::string& dir, const SyntheticData& data) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());

    write_ratings_csv(dir + "/source.csv", data.pair.source);
    write_ratings_csv(dir + "/target.csv", data.pair.target);

    json truth{{"format_version", 1},
               {"spec", spec_to_json(data.spec)},
               {"latents",
                {{"source_items", matrix_to_json(data.source_item_latents)},
                 {"source_users", matrix_to_json(data.source_user_latents)},
                 {"target_items", matrix_to_json(data.target_item_latents)},
                 {"target_users", matrix_to_json(data.target_user_latents)}}}};
    std::ofstream out(dir + "/truth.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + dir + "/truth.json");
    out << truth.dump(2) << "\n";
}

SyntheticData load_synthetic(const std::string& dir) {
    std::ifstream in(dir + "/truth.json");
    if (!in) throw IoError("cannot open " + dir + "/truth.json");
    json truth;
    try {
        in >> truth;
    } catch (const json::exception& e) {
        throw IoError(dir + "/truth.json: " + e.what());
    }
    SyntheticData data;
    data.spec = spec_from_json(truth.at("spec"));
    const auto& lat = truth.at("latents");
    data.source_item_latents = matrix_from_json(lat.at("source_items"));
    data.source_user_latents = matrix_from_json(lat.at("source_users"));
    data.target_item_latents = matrix_from_json(lat.at("target_items"));
    data.target_user_latents = matrix_from_json(lat.at("target_users"));

    RatingMatrix source = read_ratings_csv(dir + "/source.csv", data.spec.m, data.spec.n);
    RatingMatrix target = read_ratings_csv(dir + "/target.csv", data.spec.m, data.spec.n);
    data.pair = make_domain_pair(std::move(source), std::move(target), data.spec.shared_axis);
    return data;
}

}  // namespace cdrec
