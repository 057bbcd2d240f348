#include "cdrec/train.hpp"

#include <algorithm>

namespace cdrec {

TrainViews make_train_views(const DomainPair& pair, const ColdStartSplit& split,
                            const SplitPlan& plan) {
    TrainViews views;
    views.source = &pair.source;
    views.target_train = &split.target_train;
    views.axis = pair.shared_axis;
    views.train_entities = plan.train;
    return views;
}

std::vector<std::vector<int>> make_batches(const std::vector<int>& indices, int batch_size,
                                           std::mt19937_64& rng) {
    std::vector<int> order = indices;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<int>> batches;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

}  // namespace cdrec
