#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "ssbrb/brb.hpp"
#include "ssbrb/irc.hpp"
#include "ssbrb/muteness.hpp"
#include "ssbrb/params.hpp"
#include "ssbrb/wire.hpp"

namespace ssbrb {

/// One protocol participant: delta concurrent (broadcast, counter,
/// detector) triples behind a single message type, plus the queue of
/// values waiting for a free instance and the per-broadcaster FIFO
/// delivery cursor.
///
/// The availability mode selects how delivery and re-broadcast are
/// gated. Recycled mode runs the round counters (the normal
/// configuration); Always mode short-circuits both gates to constant
/// true and latches deliveries, which is the classic single-broadcast
/// asynchronous setup.
class Node {
public:
    enum class Availability { Recycled, Always };

    struct Config {
        Availability availability = Availability::Recycled;
        bool trust_all_peers = false;
        bool reply_only_to_ack_requests = false;
        bool fifo = false;  // cycle own broadcasts through instances strictly in order
        std::size_t queue_depth = 16;
    };

    struct Instance {
        BrbState brb;
        IrcState irc;
        MutenessState mute;
    };

    struct Outgoing {
        NodeId to;
        WireMessage msg;
    };

    struct DeliveryEvent {
        int instance = 0;
        NodeId slot = 0;
        int round = kNoRound;
        Value value;
        int support = 0;
        bool conflict = false;
    };

    enum class BroadcastResult { Started, Queued, Rejected };

    struct BroadcastOutcome {
        BroadcastResult result;
        int instance = -1;
        int round = kNoRound;
    };

    struct StartedBroadcast {
        int instance = 0;
        int round = kNoRound;
        Value value;
    };

    struct ForfeitedRound {
        int instance = 0;
        int round = kNoRound;
    };

    Node() = default;
    Node(NodeId me, const Params& p) : Node(me, p, Config{}) {}
    Node(NodeId me, const Params& p, Config cfg) : me_(me), params_(p), cfg_(cfg) {
        instances_.reserve(static_cast<std::size_t>(p.delta));
        for (int d = 0; d < p.delta; ++d)
            instances_.push_back({BrbState(me, p.n), IrcState(me, p.n), MutenessState(me, p.n)});
        fifo_next_.assign(static_cast<std::size_t>(p.n), 0);
        checked_.assign(static_cast<std::size_t>(p.delta * p.n), {0, 0});
        stated_of_me_.assign(static_cast<std::size_t>(p.delta * p.n), kNoRound);
    }

    NodeId me() const { return me_; }
    const Params& params() const { return params_; }
    const Config& config() const { return cfg_; }
    int delta() const { return static_cast<int>(instances_.size()); }

    const Instance& instance(int d) const { return instances_[static_cast<std::size_t>(d)]; }
    Instance& instance_mut(int d) { return instances_[static_cast<std::size_t>(d)]; }

    std::size_t pending_count() const { return pending_.size(); }
    std::uint64_t malformed_count() const { return malformed_; }
    int fifo_next(NodeId k) const { return fifo_next_[static_cast<std::size_t>(k)]; }

    /// Peers the detector of one instance currently trusts.
    std::vector<NodeId> trusted_for(int d) const {
        if (cfg_.trust_all_peers) {
            std::vector<NodeId> all;
            for (NodeId j = 0; j < params_.n; ++j)
                if (j != me_) all.push_back(j);
            return all;
        }
        return instances_[static_cast<std::size_t>(d)].mute.trusted(params_);
    }

    /// Transmit gate: tries to open a fresh round on the instance.
    /// Succeeding has side effects (detector reset, labels cleared,
    /// own slot recycled); failing is a pure no-op.
    std::optional<int> try_open_round(int d) {
        if (cfg_.availability == Availability::Always) return kNoRound;
        Instance& inst = instances_[static_cast<std::size_t>(d)];
        auto round = inst.irc.increment(
            trusted_for(d), params_, [&] { inst.mute.reset(); },
            [&](NodeId k) { inst.brb.recycle(k); });
        if (round) opened_.push_back({d, *round});
        return round;
    }

    bool tx_available(int d) { return try_open_round(d).has_value(); }

    /// Starts v on the lowest-index instance whose transmit gate opens,
    /// else queues it, else rejects when the queue is full.
    BroadcastOutcome repeated_broadcast(const Value& v) {
        if (auto started = try_start(v)) return *started;
        if (pending_.size() < cfg_.queue_depth) {
            pending_.push_back(v);
            return {BroadcastResult::Queued, -1, kNoRound};
        }
        return {BroadcastResult::Rejected, -1, kNoRound};
    }

    /// One do-forever iteration: start queued broadcasts whose gate
    /// opens, refresh every instance's record, and emit the resulting
    /// payload to every peer with the counter fields for that peer.
    /// rule: piggyback
    std::vector<Outgoing> tick() {
        for (int d = 0; d < delta(); ++d) repair_round_state(d);

        while (!pending_.empty()) {
            if (!try_start(pending_.front())) break;
            pending_.pop_front();
        }

        std::vector<Outgoing> out;
        out.reserve(static_cast<std::size_t>(delta() * (params_.n - 1)));
        for (int d = 0; d < delta(); ++d) {
            Instance& inst = instances_[static_cast<std::size_t>(d)];
            const BrbEntry payload = inst.brb.local_step(params_);
            const std::vector<int> views = round_views(inst);
            for (NodeId j = 0; j < params_.n; ++j) {
                if (j == me_) continue;
                out.push_back({j, WireMessage{d, payload, inst.irc.tx(j), views}});
            }
        }
        return out;
    }

    /// Handles one arrived message: fence the broadcast record against
    /// this node's round views, fold what survives, then the counter
    /// fields (whose round adoption may recycle the sender's slot,
    /// after this message's record was already folded). Returns the
    /// counter reply to send back, if any.
    std::optional<Outgoing> on_message(NodeId from, const WireMessage& w) {
        if (w.instance < 0 || w.instance >= delta() || from < 0 || from >= params_.n ||
            from == me_) {
            ++malformed_;
            return std::nullopt;
        }
        Instance& inst = instances_[static_cast<std::size_t>(w.instance)];
        const BrbEntry fenced = cfg_.availability == Availability::Always
                                    ? w.brb
                                    : fence_payload(inst, from, w);
        if (!inst.brb.merge_incoming(from, fenced, params_)) {
            ++malformed_;
            return std::nullopt;
        }
        const auto meix = static_cast<std::size_t>(me_);
        stated_of_me_[static_cast<std::size_t>(w.instance * params_.n + from)] =
            meix < w.views.size() ? w.views[meix] : kNoRound;
        if (cfg_.availability == Availability::Always) return std::nullopt;
        auto reply = inst.irc.rx(
            from, w.irc, params_, [&](NodeId k) { inst.brb.recycle(k); },
            [&](NodeId k) { inst.mute.count(k, params_); });
        if (!reply) return std::nullopt;
        if (cfg_.reply_only_to_ack_requests && !w.irc.ack) return std::nullopt;
        return Outgoing{from, WireMessage{w.instance, BrbEntry{}, *reply,
                                          round_views(inst)}};
    }

    /// Collects every delivery that is ready right now, across all
    /// instances and broadcasters, without FIFO constraints.
    std::vector<DeliveryEvent> poll() {
        std::vector<DeliveryEvent> out;
        for (int d = 0; d < delta(); ++d)
            for (NodeId k = 0; k < params_.n; ++k) poll_one(d, k, out);
        return out;
    }

    /// FIFO drain for one broadcaster: only the instance under the
    /// cursor may deliver, and each delivery advances the cursor
    /// cyclically. rule: fifo-gate
    std::vector<DeliveryEvent> fifo_poll(NodeId k) {
        std::vector<DeliveryEvent> out;
        while (true) {
            const int d = fifo_next_[static_cast<std::size_t>(k)];
            const std::size_t before = out.size();
            poll_one(d, k, out);
            if (out.size() == before) break;
            fifo_next_[static_cast<std::size_t>(k)] = (d + 1) % delta();
        }
        return out;
    }

    /// Targeted drain after one incoming record merge: only the named
    /// broadcaster slots of one instance can have gained support.
    std::vector<DeliveryEvent> poll_some(int d, const std::vector<NodeId>& slots) {
        std::vector<DeliveryEvent> out;
        if (d < 0 || d >= delta()) return out;
        for (NodeId k : slots)
            if (k >= 0 && k < params_.n) poll_one(d, k, out);
        return out;
    }

    /// Rounds opened since the last drain, as (instance, round) pairs.
    std::vector<std::pair<int, int>> take_opened_rounds() {
        return std::exchange(opened_, {});
    }

    /// Keeps only the incoming slot content whose stated round matches
    /// this node's current round for that slot, so claims from before a
    /// slot was recycled cannot re-enter the record afterwards. Absent
    /// views count as the sentinel, which matches slots that never
    /// opened a round. Pairs naming out-of-range slots pass through so
    /// record validation still rejects them. Pure; public so the
    /// harness can audit in-flight messages the same way the receive
    /// path will. rule: view-fence
    BrbEntry fence_payload(const Instance& inst, NodeId from, const WireMessage& w) const {
        auto stated = [&](NodeId k) {
            const auto idx = static_cast<std::size_t>(k);
            return idx < w.views.size() ? w.views[idx] : kNoRound;
        };
        auto fresh = [&](NodeId k) {
            return IrcState::norm(stated(k), params_) ==
                   IrcState::norm(inst.irc.cur(k), params_);
        };
        BrbEntry out;
        if (fresh(from)) out.init = w.brb.init;
        for (const auto& pr : w.brb.echo)
            if (pr.first < 0 || pr.first >= params_.n || fresh(pr.first)) out.echo.insert(pr);
        for (const auto& pr : w.brb.ready)
            if (pr.first < 0 || pr.first >= params_.n || fresh(pr.first)) out.ready.insert(pr);
        return out;
    }

    /// Broadcasts started since the last drain, including queued values
    /// that a later tick placed.
    std::vector<StartedBroadcast> take_started() { return std::exchange(started_, {}); }

    /// Rounds abandoned as undeliverable since the last drain. Nobody
    /// owes these a delivery anymore; a forfeited value travels again
    /// under the following round.
    std::vector<ForfeitedRound> take_forfeits() { return std::exchange(forfeits_, {}); }

    bool all_consistent() const {
        for (const auto& inst : instances_)
            if (!inst.brb.is_consistent(params_)) return false;
        return true;
    }

private:
    /// Counter repairs plus forfeiture of rounds that can never close.
    /// The transmit gate only reopens once enough peers consume the
    /// open round, so a round that no quorum can ever deliver shuts
    /// the gate for good; two such states are recognizable on the
    /// spot from local evidence and are forfeited here.
    void repair_round_state(int d) {
        Instance& inst = instances_[static_cast<std::size_t>(d)];
        inst.irc.repair_aliases(params_);
        const int r = inst.irc.cur(me_);
        if (r == kNoRound) return;
        const BrbEntry& mine = inst.brb.entry(me_);
        // rule: vacuous-round-reset. Empty own init: the round's
        // content is gone, nothing remains that a peer could deliver.
        bool dead = mine.init.empty();
        if (!dead) {
            // rule: foreclosed-round-reset. A peer's acknowledgment is
            // foreclosed if it committed its echo for this slot to
            // some other value (only a recycle clears that, which
            // takes a newer round), or if it is trusted but places
            // this slot ahead of r, where it refuses r as stale. Once
            // t+1 votes are foreclosed, at most n-t-1 <= (n+t)/2
            // echoes remain anywhere, short of quorum, so no peer can
            // ever consume the round and the gate never reopens. The
            // value travels again on the next round. Unreachable
            // without corrupted state: correct peers echo this node's
            // own init and never run ahead of its round, so at most t
            // votes can be misrepresented.
            const Value& v = *mine.init.begin();
            const auto trusted = trusted_for(d);
            int foreclosed = 0;
            for (NodeId l = 0; l < params_.n; ++l) {
                if (l == me_) continue;
                const auto& echo = inst.brb.entry(l).echo;
                bool committed_other = false, committed_mine = false;
                for (auto it = echo.lower_bound({me_, Value()});
                     it != echo.end() && it->first == me_; ++it) {
                    if (it->second == v)
                        committed_mine = true;
                    else
                        committed_other = true;
                }
                bool gone = committed_other && !committed_mine;
                if (!gone && std::find(trusted.begin(), trusted.end(), l) != trusted.end()) {
                    const int s = stated_of_me_[static_cast<std::size_t>(d * params_.n + l)];
                    gone = IrcState::behind(1, r, s, params_) &&
                           IrcState::norm(s, params_) != IrcState::norm(r, params_);
                }
                if (gone) ++foreclosed;
            }
            if (foreclosed >= params_.t + 1) {
                dead = true;
                pending_.push_front(v);
            }
        }
        if (!dead) return;
        forfeits_.push_back({d, r});
        if (pending_.empty()) {
            inst.irc.clear_round();
            return;
        }
        const int round = inst.irc.force_round(
            params_, [&] { inst.mute.reset(); },
            [&](NodeId k) { inst.brb.recycle(k); });
        opened_.push_back({d, round});
        inst.brb.broadcast(pending_.front(), true);
        started_.push_back({d, round, pending_.front()});
        pending_.pop_front();
    }

    /// FIFO keeps one sender cursor and never skips past a closed
    /// instance; otherwise the lowest open instance wins.
    std::optional<BroadcastOutcome> try_start(const Value& v) {
        if (cfg_.fifo) {
            if (auto round = try_open_round(fifo_send_)) {
                const int d = fifo_send_;
                fifo_send_ = (fifo_send_ + 1) % delta();
                instances_[static_cast<std::size_t>(d)].brb.broadcast(v, true);
                started_.push_back({d, *round, v});
                return BroadcastOutcome{BroadcastResult::Started, d, *round};
            }
            return std::nullopt;
        }
        for (int d = 0; d < delta(); ++d) {
            if (auto round = try_open_round(d)) {
                instances_[static_cast<std::size_t>(d)].brb.broadcast(v, true);
                started_.push_back({d, *round, v});
                return BroadcastOutcome{BroadcastResult::Started, d, *round};
            }
        }
        return std::nullopt;
    }

    /// Rounds this node currently associates with each slot of one
    /// instance, as stamped on outgoing messages. Always mode states
    /// no view (rounds are not tracked there).
    std::vector<int> round_views(const Instance& inst) const {
        if (cfg_.availability == Availability::Always) return {};
        std::vector<int> v(static_cast<std::size_t>(params_.n), kNoRound);
        for (NodeId k = 0; k < params_.n; ++k)
            v[static_cast<std::size_t>(k)] = inst.irc.cur(k);
        return v;
    }

    void poll_one(int d, NodeId k, std::vector<DeliveryEvent>& out) {
        Instance& inst = instances_[static_cast<std::size_t>(d)];
        // A slot that did not deliver keeps not delivering until the
        // record or the round fields change, so the scan is skipped
        // while both versions stand still.
        auto& mark = checked_[static_cast<std::size_t>(d * params_.n + k)];
        const std::pair<std::uint64_t, std::uint64_t> key{inst.brb.version(),
                                                          inst.irc.fetch_version()};
        if (cfg_.availability == Availability::Always) {
            if (inst.brb.was_delivered(k)) return;
            if (mark == key) return;
            auto del = inst.brb.deliver(k, true, params_);
            if (del) {
                out.push_back({d, k, kNoRound, del->value, del->support, del->conflict});
                mark = {0, 0};
            } else {
                mark = key;
            }
            return;
        }
        if (mark == key) return;
        // Quorum first: the receive gate is consumed only when a
        // delivery will actually happen, because fetch returns each
        // fresh round exactly once.
        if (!inst.brb.deliverable(k, params_)) {
            mark = key;
            return;
        }
        auto round = inst.irc.fetch(k, params_);
        if (!round) {
            mark = {inst.brb.version(), inst.irc.fetch_version()};
            return;
        }
        auto del = inst.brb.deliver(k, true, params_);
        if (del) out.push_back({d, k, *round, del->value, del->support, del->conflict});
        mark = {0, 0};
    }

    NodeId me_ = 0;
    Params params_;
    Config cfg_;
    std::vector<Instance> instances_;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> checked_;
    std::vector<int> stated_of_me_;
    std::deque<Value> pending_;
    std::vector<int> fifo_next_;
    int fifo_send_ = 0;
    std::vector<std::pair<int, int>> opened_;
    std::vector<StartedBroadcast> started_;
    std::vector<ForfeitedRound> forfeits_;
    std::uint64_t malformed_ = 0;
};

}  // namespace ssbrb
