#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "ssbrb/params.hpp"

namespace ssbrb {

/// Eventually-mute failure detector.
///
/// rt[k][j] counts round trips completed with j since the last round
/// trip with k, saturating at the counter bound. A peer j is suspected
/// once the rest of the system demonstrably keeps completing round
/// trips while j does not: the sum of row j, after discarding the top
/// t columns, reaches theta. Discarding the top t entries keeps t
/// Byzantine peers from inflating a correct peer's row by completing
/// round trips at inflated speed.
class MutenessState {
public:
    MutenessState() = default;
    MutenessState(NodeId me, int n)
        : me_(me), rt_(static_cast<std::size_t>(n),
                       std::vector<int>(static_cast<std::size_t>(n), 0)) {}

    NodeId me() const { return me_; }
    int n() const { return static_cast<int>(rt_.size()); }

    int rt(NodeId k, NodeId j) const {
        return rt_[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    }
    int& rt_mut(NodeId k, NodeId j) {
        ++version_;
        return rt_[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    }

    /// Start of a new round: forget everything.
    void reset() {
        ++version_;
        for (auto& row : rt_) std::fill(row.begin(), row.end(), 0);
    }

    /// A round trip with j completed. rule: rt-count
    void count(NodeId j, const Params& p) {
        for (NodeId k = 0; k < n(); ++k) {
            if (k == me_ || k == j) continue;
            int& cell = rt_mut(k, j);
            cell = std::min(p.modulus, cell + 1);
        }
        // rule: rt-row-reset
        for (NodeId l = 0; l < n(); ++l) rt_mut(j, l) = 0;
    }

    /// Row sum for j over all peers' columns, with the top t entries
    /// discarded. rule: top-t-exclusion
    int excess_sum(NodeId j, const Params& p) const {
        std::vector<int> row;
        row.reserve(static_cast<std::size_t>(n()));
        for (NodeId l = 0; l < n(); ++l)
            if (l != me_) row.push_back(rt(j, l));
        std::sort(row.begin(), row.end(), std::greater<int>());
        int sum = 0;
        for (std::size_t i = static_cast<std::size_t>(p.t); i < row.size(); ++i) sum += row[i];
        return sum;
    }

    /// Peers currently considered alive, in id order. Recomputed only
    /// after a counter mutation; the verdict is cached in between.
    const std::vector<NodeId>& trusted(const Params& p) const {
        if (cached_version_ != version_) {
            cached_trusted_.clear();
            for (NodeId j = 0; j < n(); ++j) {
                if (j == me_) continue;
                if (p.theta > excess_sum(j, p)) cached_trusted_.push_back(j);
            }
            cached_version_ = version_;
        }
        return cached_trusted_;
    }

    bool operator==(const MutenessState& o) const { return me_ == o.me_ && rt_ == o.rt_; }

private:
    NodeId me_ = 0;
    std::vector<std::vector<int>> rt_;
    std::uint64_t version_ = 1;
    mutable std::uint64_t cached_version_ = 0;
    mutable std::vector<NodeId> cached_trusted_;
};

}  // namespace ssbrb
