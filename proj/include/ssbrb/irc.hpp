#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "ssbrb/params.hpp"

namespace ssbrb {

/// Recycling-counter fields piggybacked on every message.
/// ack=true marks a sender's periodic announcement (seq is its own
/// current round); ack=false marks a reply (seq echoes the last round
/// the replier fetched from the destination, lbl echoes the label of
/// the message being acknowledged).
struct IrcWire {
    bool ack = true;
    int seq = kNoRound;
    int lbl = 0;

    bool operator==(const IrcWire&) const = default;
};

/// Independent round counter with wraparound recycling.
///
/// Each node numbers its own broadcast rounds with cur[me]; peers track
/// the last announced round per sender (cur[k]) and the last round they
/// handed to the application (nxt[k]). Staleness is judged with mod-B
/// windows of width lambda (one hop) or 2*lambda (a round trip), which
/// is what lets the counter recover from arbitrary field corruption.
///
/// A node may only open a new round once every trusted peer completed
/// enough acknowledged round trips (label above 2*(capacity+1)), so no
/// in-flight message of the previous round can survive the recycle.
class IrcState {
public:
    IrcState() = default;
    IrcState(NodeId me, int n)
        : me_(me), cur_(static_cast<std::size_t>(n), kNoRound),
          nxt_(static_cast<std::size_t>(n), kNoRound),
          lbl_(static_cast<std::size_t>(n), 0) {}

    NodeId me() const { return me_; }
    int n() const { return static_cast<int>(cur_.size()); }

    int cur(NodeId k) const { return cur_[static_cast<std::size_t>(k)]; }
    int nxt(NodeId k) const { return nxt_[static_cast<std::size_t>(k)]; }
    int lbl(NodeId k) const { return lbl_[static_cast<std::size_t>(k)]; }

    int& cur_mut(NodeId k) {
        ++fetch_version_;
        return cur_[static_cast<std::size_t>(k)];
    }
    int& nxt_mut(NodeId k) {
        ++fetch_version_;
        return nxt_[static_cast<std::size_t>(k)];
    }
    int& lbl_mut(NodeId k) { return lbl_[static_cast<std::size_t>(k)]; }

    /// Counts writes to the round fields (not labels); receive-gate
    /// verdicts stay valid while this is unchanged.
    std::uint64_t fetch_version() const { return fetch_version_; }

    static int norm(int x, const Params& p) {
        return ((x % p.modulus) + p.modulus) % p.modulus;
    }

    /// True when s lies at most d*lambda behind c in the mod-B circle
    /// (the sentinel maps to B-1 first). rule: window
    static bool behind(int d, int s, int c, const Params& p) {
        const int diff = (norm(c, p) - norm(s, p) + p.modulus) % p.modulus;
        return diff <= d * p.lambda;
    }

    /// Opens the next round if allowed. Enabled at bootstrap (no round
    /// yet) or once every trusted peer's label cleared the threshold.
    /// On success: muteness counters reset, the round advances mod B,
    /// all labels restart, and the hook recycles the own slot.
    /// rule: increment-guard
    template <class FReset, class FRecycle>
    std::optional<int> increment(const std::vector<NodeId>& trusted, const Params& p,
                                 FReset&& md_reset, FRecycle&& recycle) {
        bool enabled = cur(me_) == kNoRound;
        if (!enabled) {
            enabled = true;
            for (NodeId j : trusted) {
                if (lbl(j) <= p.label_threshold()) {
                    enabled = false;
                    break;
                }
            }
        }
        if (!enabled) return std::nullopt;
        md_reset();
        const int base = cur(me_) == kNoRound ? resume_ : cur(me_);
        cur_mut(me_) = (base + 1) % p.modulus;
        // rule: label-reset
        if (!p.mutations.skip_label_reset) std::fill(lbl_.begin(), lbl_.end(), 0);
        recycle(me_);
        return cur(me_);
    }

    /// Abandons the open round and returns to idle. For rounds that can
    /// never be acknowledged and with nothing left to send; the next
    /// increment reopens through the normal path. The abandoned number
    /// is remembered so the stream resumes behind it instead of
    /// restarting: reusing a number early would let stragglers of the
    /// old round alias the new one. rule: round-forfeit
    void clear_round() {
        resume_ = cur(me_);
        cur_mut(me_) = kNoRound;
    }

    /// Abandons the open round and opens the next one immediately,
    /// skipping the acknowledgment gate. For rounds that can never be
    /// acknowledged: no peer consumes them, no label ever moves, and
    /// the gate would stay shut for good. Advancing keeps the stream
    /// monotone, so peers that did adopt the dead round move on
    /// normally. Same side effects as a gated increment.
    /// rule: round-forfeit
    template <class FReset, class FRecycle>
    int force_round(const Params& p, FReset&& md_reset, FRecycle&& recycle) {
        md_reset();
        cur_mut(me_) = (cur(me_) + 1) % p.modulus;
        if (!p.mutations.skip_label_reset) std::fill(lbl_.begin(), lbl_.end(), 0);
        recycle(me_);
        return cur(me_);
    }

    /// Steps every consumption point that sits strictly ahead of its
    /// announced round back to the fresh side. A consumption point can
    /// legitimately equal the announced round (consumed) or trail it by
    /// any distance (missed rounds), but the values just ahead of it
    /// arise two ways, both of which would wrongly mark the announced
    /// round as consumed: leftover state from before a reset, or a
    /// point so far behind that it wraps into the window. Either way
    /// the announced round was not consumed yet, so fetch must see it
    /// as fresh. rule: stale-alias-repair
    void repair_aliases(const Params& p) {
        for (NodeId k = 0; k < static_cast<NodeId>(cur_.size()); ++k) {
            if (cur(k) == kNoRound) continue;
            if (behind(1, cur(k), nxt(k), p) && norm(nxt(k), p) != norm(cur(k), p))
                nxt_mut(k) = (norm(cur(k), p) + p.modulus - 1) % p.modulus;
        }
    }

    /// Hands the application the latest round announced by k, once.
    /// Returns nothing while the announced round is still the fetched
    /// one (within one window). Self-fetch (k == me) works the same
    /// way and is how a node consumes its own rounds. rule: fetch-freshness
    std::optional<int> fetch(NodeId k, const Params& p) {
        if (behind(1, cur(k), nxt(k), p)) return std::nullopt;
        nxt_mut(k) = cur(k);
        return cur(k);
    }

    bool rx_available(NodeId k, const Params& p) { return fetch(k, p).has_value(); }

    /// Fields to piggyback on the next message to j.
    IrcWire tx(NodeId j) const { return IrcWire{true, cur(me_), lbl(j)}; }

    /// Handles the piggybacked fields of a message from j. Returns the
    /// reply to send back, or nothing when the message was an exact
    /// acknowledgment (those terminate the exchange).
    template <class FRecycle, class FCnt>
    std::optional<IrcWire> rx(NodeId j, const IrcWire& w, const Params& p, FRecycle&& recycle,
                              FCnt&& md_cnt) {
        // rule: ack-match. A reply acknowledges our current round when
        // its echoed seq sits within a round-trip window of cur[me] and
        // its label is exactly the one we last sent to j. Each matched
        // reply completes one round trip.
        if (!w.ack && behind(2, cur(me_), w.seq, p) && lbl(j) == w.lbl) {
            md_cnt(j);
            lbl_mut(j) = std::min(p.modulus, w.lbl + 1);
            return std::nullopt;
        }
        // rule: round-adopt. Only announcements carry j's own round;
        // replies echo our stream, and adopting one would corrupt the
        // record of j with our own numbers.
        if (w.ack && !behind(1, w.seq, cur(j), p)) {
            cur_mut(j) = w.seq == kNoRound ? kNoRound : norm(w.seq, p);
            recycle(j);
        }
        // rule: ack-reply. Every arrival that did not terminate as a
        // matched acknowledgment is answered with the last round
        // fetched from j plus the incoming label.
        return IrcWire{false, nxt(j), w.lbl};
    }

    bool operator==(const IrcState& o) const {
        return me_ == o.me_ && cur_ == o.cur_ && nxt_ == o.nxt_ && lbl_ == o.lbl_;
    }

private:
    NodeId me_ = 0;
    std::vector<int> cur_;
    std::vector<int> nxt_;
    std::vector<int> lbl_;
    int resume_ = kNoRound;
    std::uint64_t fetch_version_ = 0;
};

}  // namespace ssbrb
