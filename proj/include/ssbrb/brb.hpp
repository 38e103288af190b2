#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ssbrb/flatset.hpp"
#include "ssbrb/params.hpp"

namespace ssbrb {

/// One node's record of another node's protocol messages: the init
/// value it broadcast plus every (broadcaster, value) pair it has
/// echoed or readied. An entry travels on the wire verbatim, so the
/// same struct doubles as the broadcast payload.
struct BrbEntry {
    using ValueSet = FlatSet<Value>;
    using PairSet = FlatSet<std::pair<NodeId, Value>>;

    ValueSet init;
    PairSet echo;
    PairSet ready;

    bool empty() const { return init.empty() && echo.empty() && ready.empty(); }

    bool operator==(const BrbEntry&) const = default;

    /// True if the set holds two pairs (k,m), (k,m') with m != m'.
    /// Sets order by (node, value), so conflicting pairs are adjacent.
    static bool has_conflict(const PairSet& s) {
        const std::pair<NodeId, Value>* prev = nullptr;
        for (const auto& p : s) {
            if (prev && prev->first == p.first) return true;
            prev = &p;
        }
        return false;
    }

    static bool has_pair_for(const PairSet& s, NodeId k) {
        auto it = s.lower_bound({k, Value()});
        return it != s.end() && it->first == k;
    }

    static void erase_pairs_for(PairSet& s, NodeId k) {
        auto first = s.lower_bound({k, Value()});
        auto last = first;
        while (last != s.end() && last->first == k) ++last;
        s.erase(first, last);
    }
};

/// Repeated reliable broadcast state machine for one instance at one
/// node. Designed for arbitrary initial states: a do-forever step first
/// repairs the local record, then applies the echo and ready rules, and
/// the result of a step is the payload to broadcast.
///
/// Delivery is pull-style. `deliver` only reports a value when the
/// caller confirms the slot's round is available (the recycling counter
/// says a fresh round arrived), and `recycle` resets a slot for reuse.
class BrbState {
public:
    BrbState() = default;
    BrbState(NodeId me, int n)
        : me_(me), entry_(static_cast<std::size_t>(n)),
          delivered_(static_cast<std::size_t>(n), 0),
          conflict_(static_cast<std::size_t>(n), 0) {}

    NodeId me() const { return me_; }
    int n() const { return static_cast<int>(entry_.size()); }

    const BrbEntry& entry(NodeId k) const { return entry_[static_cast<std::size_t>(k)]; }
    BrbEntry& entry_mut(NodeId k) {
        ++version_;
        return entry_[static_cast<std::size_t>(k)];
    }

    /// Counts record mutations; unchanged-state queries can be skipped
    /// by callers that cache their last verdict against this.
    std::uint64_t version() const { return version_; }

    /// Starts broadcasting v in this instance. The caller passes the
    /// transmit gate (a fresh round was opened); nothing happens when
    /// the gate is closed.
    bool broadcast(const Value& v, bool tx_ok) {
        if (!tx_ok) return false;
        recycle(me_);
        entry_[static_cast<std::size_t>(me_)].init.insert(v);
        return true;
    }

    /// Clears the whole slot-k projection for the next round: k's init,
    /// every (k,.) echo and ready pair in every record, and the
    /// delivered flag. Recycling one's own slot also resets the own
    /// record wholesale, since its claims are being withdrawn. Other
    /// slots' support counts are untouched either way, which is what
    /// keeps support monotone between recycles. rule: recycle-reset
    void recycle(NodeId k) {
        reset_record(k);
        delivered_[static_cast<std::size_t>(k)] = 0;
        conflict_[static_cast<std::size_t>(k)] = 0;
    }

    /// The record part of a recycle, without touching the delivered or
    /// conflict marks. Round boundaries use the full recycle; the
    /// self-check uses only this.
    void reset_record(NodeId k) {
        ++version_;
        if (k == me_) {
            entry_[static_cast<std::size_t>(me_)] = BrbEntry{};
        } else {
            entry_[static_cast<std::size_t>(k)].init.clear();
        }
        for (auto& e : entry_) {
            BrbEntry::erase_pairs_for(e.echo, k);
            BrbEntry::erase_pairs_for(e.ready, k);
        }
    }

    /// Folds a payload received from node j into the record of j.
    /// Returns false (and changes nothing) for malformed payloads:
    /// more than one init value, more than 3n pairs per kind, or any
    /// oversized value. A conflicting init is skipped while echo and
    /// ready still merge. rule: merge-guard
    bool merge_incoming(NodeId j, const BrbEntry& payload, const Params& p) {
        if (j == me_ || j < 0 || j >= n()) return false;
        const std::size_t cap = static_cast<std::size_t>(3 * p.n);
        if (payload.init.size() > 1 || payload.echo.size() > cap || payload.ready.size() > cap)
            return false;
        for (const auto& v : payload.init)
            if (v.size() > kMaxValueBytes) return false;
        for (const auto& pr : payload.echo)
            if (pr.second.size() > kMaxValueBytes || pr.first < 0 || pr.first >= n()) return false;
        for (const auto& pr : payload.ready)
            if (pr.second.size() > kMaxValueBytes || pr.first < 0 || pr.first >= n()) return false;

        BrbEntry& e = entry_[static_cast<std::size_t>(j)];
        bool changed = false;
        if (!payload.init.empty() && !e.init.count(*payload.init.begin()) && e.init.empty()) {
            e.init.insert(*payload.init.begin());
            changed = true;
        }
        for (const auto& pr : payload.echo) changed |= e.echo.insert(pr).second;
        for (const auto& pr : payload.ready) changed |= e.ready.insert(pr).second;
        if (changed) ++version_;
        return true;
    }

    int echo_support(NodeId k, const Value& m) const {
        int c = 0;
        for (const auto& e : entry_) c += e.echo.count({k, m}) ? 1 : 0;
        return c;
    }

    int ready_support(NodeId k, const Value& m) const {
        int c = 0;
        for (const auto& e : entry_) c += e.ready.count({k, m}) ? 1 : 0;
        return c;
    }

    /// One do-forever iteration. Returns the refreshed own entry, which
    /// is what the node sends to every peer this tick.
    ///
    /// Order: scrub conflicting records, self-check (recycling the own
    /// slot when the echo or ready record lost its justification), then
    /// the echo and ready adoption rules. Scrubbing runs first so that
    /// the self-check judges supports that survive this step; together
    /// with the one-pair-per-broadcaster guard on adoptions this makes
    /// a single step restore consistency from any starting state.
    BrbEntry local_step(const Params& p) {
        // A full pass is a fixpoint of itself, so reruns on an
        // untouched record can return the payload straight away.
        if (version_ == stepped_version_) return entry_[static_cast<std::size_t>(me_)];
        bool mutated = false;
        // rule: conflict-scrub
        for (auto& e : entry_) {
            if (e.init.size() > 1) {
                e.init.clear();
                mutated = true;
            }
            if (BrbEntry::has_conflict(e.echo)) {
                e.echo.clear();
                mutated = true;
            }
            if (BrbEntry::has_conflict(e.ready)) {
                e.ready.clear();
                mutated = true;
            }
        }

        // rule: self-check
        BrbEntry& mine = entry_[static_cast<std::size_t>(me_)];
        bool justified = true;
        for (const auto& [j, m] : mine.echo) {
            if (j < 0 || j >= n() || !entry_[static_cast<std::size_t>(j)].init.count(m)) {
                justified = false;
                break;
            }
        }
        if (justified) {
            for (const auto& [j, m] : mine.ready) {
                if (!p.echo_quorum_met(echo_support(j, m)) &&
                    ready_support(j, m) < p.ready_relay_threshold()) {
                    justified = false;
                    break;
                }
            }
        }
        // Repair resets the record only. Delivery history survives: a
        // conflicting-then-scrubbed foreign record can briefly cost a
        // ready pair its justification, and forgetting the delivered
        // mark here would let that slot deliver a second time.
        if (!justified) reset_record(me_);

        // rule: echo-adopt (first value per broadcaster wins)
        for (NodeId k = 0; k < n(); ++k) {
            const auto& init = entry_[static_cast<std::size_t>(k)].init;
            if (!init.empty() && !BrbEntry::has_pair_for(mine.echo, k)) {
                mine.echo.insert({k, *init.begin()});
                mutated = true;
            }
        }

        // rule: ready-adopt. Candidates need an echo quorum or t+1 ready
        // records; at most one pair per broadcaster ever enters the own
        // ready set, smallest value first on the (corrupt-state-only)
        // double-candidate case.
        for (NodeId k = 0; k < n(); ++k) {
            if (BrbEntry::has_pair_for(mine.ready, k)) continue;
            FlatSet<Value> candidates;
            for (const auto& e : entry_) {
                for (auto it = e.echo.lower_bound({k, Value()});
                     it != e.echo.end() && it->first == k; ++it)
                    candidates.insert(it->second);
                for (auto it = e.ready.lower_bound({k, Value()});
                     it != e.ready.end() && it->first == k; ++it)
                    candidates.insert(it->second);
            }
            for (const auto& m : candidates) {
                if (p.echo_quorum_met(echo_support(k, m)) ||
                    ready_support(k, m) >= p.ready_relay_threshold()) {
                    mine.ready.insert({k, m});
                    mutated = true;
                    break;
                }
            }
        }
        if (mutated) ++version_;
        stepped_version_ = version_;
        return mine;
    }

    struct Delivery {
        Value value;
        int support = 0;
        bool conflict = false;  // two values met the threshold (corrupt state)
    };

    /// Pure query: would slot k deliver right now? Used by callers to
    /// avoid consuming the once-only receive gate when no quorum exists.
    std::optional<Delivery> deliverable(NodeId k, const Params& p) const {
        FlatSet<Value> qualifying;
        for (const auto& e : entry_) {
            for (auto it = e.ready.lower_bound({k, Value()});
                 it != e.ready.end() && it->first == k; ++it) {
                if (ready_support(k, it->second) >= p.deliver_threshold())
                    qualifying.insert(it->second);
            }
        }
        if (qualifying.empty()) return std::nullopt;
        Delivery d;
        d.value = *qualifying.begin();  // lexicographic tie-break
        d.support = ready_support(k, d.value);
        d.conflict = qualifying.size() > 1;
        return d;
    }

    /// Delivery with the receive gate applied. Marks the slot delivered
    /// and, on the corrupt double-quorum case, flags the conflict so
    /// the condition is visible until the slot recycles.
    std::optional<Delivery> deliver(NodeId k, bool rx_ok, const Params& p) {
        auto d = deliverable(k, p);
        if (!d || !rx_ok) return std::nullopt;
        delivered_[static_cast<std::size_t>(k)] = 1;
        if (d->conflict) conflict_[static_cast<std::size_t>(k)] = 1;
        return d;
    }

    bool was_delivered(NodeId k) const { return delivered_[static_cast<std::size_t>(k)] != 0; }
    bool conflict_observed(NodeId k) const { return conflict_[static_cast<std::size_t>(k)] != 0; }

    void set_delivered(NodeId k, bool v) {
        ++version_;
        delivered_[static_cast<std::size_t>(k)] = v ? 1 : 0;
    }

    /// Local consistency predicate: every record holds at most one
    /// value per broadcaster, and every own ready pair is justified by
    /// an echo quorum or t+1 ready records. Always evaluated against
    /// the unmutated thresholds.
    bool is_consistent(const Params& p) const {
        for (const auto& e : entry_) {
            if (e.init.size() > 1) return false;
            if (BrbEntry::has_conflict(e.echo) || BrbEntry::has_conflict(e.ready)) return false;
        }
        const BrbEntry& mine = entry_[static_cast<std::size_t>(me_)];
        for (const auto& [j, m] : mine.ready) {
            if (!p.echo_quorum_met_strict(echo_support(j, m)) &&
                ready_support(j, m) < p.ready_relay_threshold())
                return false;
        }
        return true;
    }

    bool operator==(const BrbState& o) const {
        return me_ == o.me_ && entry_ == o.entry_ && delivered_ == o.delivered_ &&
               conflict_ == o.conflict_;
    }

private:
    NodeId me_ = 0;
    std::vector<BrbEntry> entry_;
    std::vector<char> delivered_;
    std::vector<char> conflict_;
    std::uint64_t version_ = 1;
    std::uint64_t stepped_version_ = 0;
};

}  // namespace ssbrb
