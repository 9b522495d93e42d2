#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace htgn {

// AUC via the Mann-Whitney rank statistic with tie-averaged ranks.
inline double auc_score(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty())
        throw std::invalid_argument("auc_score: need both positive and negative scores");
    struct Item {
        double score;
        bool positive;
    };
    std::vector<Item> items;
    items.reserve(pos.size() + neg.size());
    for (double s : pos) items.push_back({s, true});
    for (double s : neg) items.push_back({s, false});
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.score < b.score; });

    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < items.size()) {
        size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        for (size_t k = i; k < j; ++k)
            if (items[k].positive) rank_sum_pos += avg_rank;
        i = j;
    }
    const double m = static_cast<double>(pos.size());
    const double n = static_cast<double>(neg.size());
    return (rank_sum_pos - m * (m + 1.0) / 2.0) / (m * n);
}

// Average precision by precision-recall summation over the descending-score
// ranking; tied scores are processed as one block.
inline double ap_score(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty())
        throw std::invalid_argument("ap_score: need both positive and negative scores");
    struct Item {
        double score;
        bool positive;
    };
    std::vector<Item> items;
    items.reserve(pos.size() + neg.size());
    for (double s : pos) items.push_back({s, true});
    for (double s : neg) items.push_back({s, false});
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.score > b.score; });

    double ap = 0.0;
    size_t tp = 0, seen = 0;
    size_t i = 0;
    while (i < items.size()) {
        size_t j = i, block_tp = 0;
        while (j < items.size() && items[j].score == items[i].score) {
            if (items[j].positive) ++block_tp;
            ++j;
        }
        tp += block_tp;
        seen = j;
        if (block_tp > 0) {
            const double precision = static_cast<double>(tp) / static_cast<double>(seen);
            const double recall_gain = static_cast<double>(block_tp) / pos.size();
            ap += precision * recall_gain;
        }
        i = j;
    }
    return ap;
}

}  // namespace htgn
