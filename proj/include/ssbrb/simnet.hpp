#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ssbrb/adversary.hpp"
#include "ssbrb/node.hpp"
#include "ssbrb/rng.hpp"
#include "ssbrb/scenario.hpp"
#include "ssbrb/trace.hpp"
#include "ssbrb/wire.hpp"

namespace ssbrb {

/// One message sitting in a directed channel. `origin` is the sender's
/// counter round at send time, used for the bounded-lifetime purge;
/// adversary messages are exempt since they have no counter state.
struct InFlight {
    NodeId from = 0;
    WireMessage msg;
    int origin = kNoRound;
    bool exempt = false;
};

/// Deterministic single-threaded network simulation. One seed fixes the
/// whole run: scheduling, loss, duplication, channel overflow victims,
/// and the transient corruption, so a trace replays byte for byte.
///
/// Scheduling is one action per step: either a node runs one do-forever
/// iteration or one in-flight message is consumed. Channel service
/// rotates a cursor over non-empty channels, which keeps per-peer
/// round-trip rates close together; that is how the simulation meets
/// the bounded relative round-trip speed the suspicion threshold
/// assumes. Reordering still happens inside each channel (random pick),
/// and loss, duplication, and overflow drops perturb on top.
/// rule: fairness-window
class World {
public:
    World(const Scenario& sc, std::uint64_t seed)
        : sc_(sc), seed_(seed), rng_(seed), n_(sc.params.n) {
        grace_ = std::max<long>(200, sc_.network.horizon / 20);
        channels_.resize(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_));
        last_tick_.assign(static_cast<std::size_t>(n_), 0);
        ticks_.assign(static_cast<std::size_t>(n_), 0);
        inc_count_.assign(static_cast<std::size_t>(n_), 0);
        next_seq_.assign(static_cast<std::size_t>(n_), 0);

        Node::Config cfg;
        cfg.availability = sc_.mode == Mode::SingleBrbAsync ? Node::Availability::Always
                                                            : Node::Availability::Recycled;
        cfg.trust_all_peers = sc_.trust_all_peers;
        cfg.reply_only_to_ack_requests = sc_.reply_only_to_ack_requests;
        cfg.fifo = sc_.fifo;
        cfg.queue_depth = sc_.workload.queue_depth;

        nodes_.resize(static_cast<std::size_t>(n_));
        advs_.resize(static_cast<std::size_t>(n_));
        trusted_cache_.resize(static_cast<std::size_t>(n_));
        for (NodeId i = 0; i < n_; ++i) {
            auto it = sc_.adversary.nodes.find(i);
            if (it != sc_.adversary.nodes.end()) {
                advs_[static_cast<std::size_t>(i)] = std::make_unique<Adversary>(
                    i, it->second, sc_, seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(i) + 1)));
            } else {
                nodes_[static_cast<std::size_t>(i)] = std::make_unique<Node>(i, sc_.params, cfg);
                auto& cache = trusted_cache_[static_cast<std::size_t>(i)];
                for (int d = 0; d < sc_.params.delta; ++d)
                    cache.push_back(nodes_[static_cast<std::size_t>(i)]->trusted_for(d));
            }
        }
    }

    Trace run() {
        emit_header();
        const long horizon = sc_.network.horizon;
        while (clock_ < horizon && !done_) {
            step();
            ++clock_;
        }
        for (NodeId i = 0; i < n_; ++i)
            if (honest(i)) poll_node(i);
        if (end_reason_.empty()) end_reason_ = "horizon";
        trace_.emit(clock_, -1, "end",
                    {{"steps", std::to_string(clock_)},
                     {"reason", end_reason_},
                     {"maxgap", std::to_string(max_tick_gap_)},
                     {"forced", std::to_string(forced_ticks_)},
                     {"oflow", std::to_string(dropped_overflow_)},
                     {"loss", std::to_string(dropped_loss_)},
                     {"dup", std::to_string(duplicated_)},
                     {"purged", std::to_string(purged_)}});
        return trace_;
    }

    long steps() const { return clock_; }
    long max_tick_gap() const { return max_tick_gap_; }
    std::uint64_t dropped_overflow() const { return dropped_overflow_; }
    std::uint64_t purged() const { return purged_; }
    long increments(NodeId i) const { return inc_count_[static_cast<std::size_t>(i)]; }
    const Node& node(NodeId i) const { return *nodes_[static_cast<std::size_t>(i)]; }
    bool honest(NodeId i) const { return nodes_[static_cast<std::size_t>(i)] != nullptr; }

    std::size_t in_flight(NodeId a, NodeId b) const { return chan(a, b).size(); }

private:
    std::vector<InFlight>& chan(NodeId a, NodeId b) {
        return channels_[static_cast<std::size_t>(a) * static_cast<std::size_t>(n_) +
                         static_cast<std::size_t>(b)];
    }
    const std::vector<InFlight>& chan(NodeId a, NodeId b) const {
        return channels_[static_cast<std::size_t>(a) * static_cast<std::size_t>(n_) +
                         static_cast<std::size_t>(b)];
    }

    void emit_header() {
        std::vector<std::pair<std::string, std::string>> kv = {
            {"mode", detail::mode_name(sc_.mode)},
            {"n", std::to_string(sc_.params.n)},
            {"t", std::to_string(sc_.params.t)},
            {"delta", std::to_string(sc_.params.delta)},
            {"modulus", std::to_string(sc_.params.modulus)},
            {"horizon", std::to_string(sc_.network.horizon)},
            {"grace", std::to_string(grace_)},
            {"settle", std::to_string(sc_.settle_rounds)},
            {"budget", std::to_string(sc_.converge_budget > 0 ? sc_.converge_budget
                                                             : sc_.settle_rounds)},
            {"rt", std::to_string(sc_.workload.rounds_target)},
            {"theta", std::to_string(sc_.params.theta)},
            {"fifo", sc_.fifo ? "1" : "0"},
            {"ploss", std::to_string(static_cast<long>(sc_.network.p_loss * 1000.0 + 0.5))},
        };
        for (const auto& [id, strat] : sc_.adversary.nodes)
            kv.push_back({"adv" + std::to_string(id), detail::strategy_name(strat)});
        if (!sc_.adversary.nodes.empty())
            kv.push_back({"advstep", std::to_string(sc_.adversary.at_step)});
        kv.push_back({"c", wire::to_hex(sc_.canonical())});
        trace_.emit(0, -1, "config", kv);
        trace_.emit(0, -1, "seed", {{"s", std::to_string(seed_)}});
        std::uint64_t mask = 0;
        for (NodeId i : sc_.correct_nodes()) mask |= 1ull << i;
        trace_.emit(0, -1, "correct", {{"set", std::to_string(mask)}});
    }

    void step() {
        if (sc_.transient.enabled && clock_ == sc_.transient.at_step) inject_transient();
        const NodeId overdue = most_overdue();
        if (overdue >= 0) {
            tick_node(overdue, true);
        } else if (rng_.below(4) == 0) {
            tick_node(next_tick_target(), false);
        } else if (!deliver_one()) {
            tick_node(next_tick_target(), false);
        }
        purge_stale();
        maybe_roundmark();
        check_settled();
    }

    /// Correct nodes run a do-forever iteration at least once per
    /// fairness window; rotation covers everyone (adversaries included)
    /// well before the forced threshold in practice.
    NodeId most_overdue() {
        const long threshold = std::max<long>(1, sc_.network.fairness_window - n_);
        NodeId worst = -1;
        long worst_gap = -1;
        for (NodeId i = 0; i < n_; ++i) {
            if (!honest(i)) continue;
            const long gap = clock_ - last_tick_[static_cast<std::size_t>(i)];
            max_tick_gap_ = std::max(max_tick_gap_, gap);
            if (gap >= threshold && gap > worst_gap) {
                worst = i;
                worst_gap = gap;
            }
        }
        return worst;
    }

    NodeId next_tick_target() {
        const NodeId i = tick_cursor_;
        tick_cursor_ = (tick_cursor_ + 1) % n_;
        return i;
    }

    void tick_node(NodeId i, bool forced) {
        last_tick_[static_cast<std::size_t>(i)] = clock_;
        ++ticks_[static_cast<std::size_t>(i)];
        if (forced) ++forced_ticks_;
        if (!honest(i)) {
            for (auto& o : advs_[static_cast<std::size_t>(i)]->tick(clock_))
                send(i, o.to, o.msg, kNoRound, true);
            return;
        }
        Node& nd = *nodes_[static_cast<std::size_t>(i)];
        feed_workload(i, nd);
        auto outs = nd.tick();
        drain_node_events(i, nd);
        for (auto& o : outs) send(i, o.to, o.msg, origin_of(nd, o.msg.instance), false);
        poll_node(i);
        if (sc_.mode == Mode::IrcOnly) direct_fetch(i, nd);
        emit_trusted_changes(i, nd);
    }

    /// Workload values are unique per broadcaster. A rounds target keeps
    /// feeding until enough rounds opened; otherwise the per-node count
    /// is the limit.
    void feed_workload(NodeId i, Node& nd) {
        if (sc_.mode == Mode::IrcOnly) {
            for (int d = 0; d < nd.delta(); ++d) nd.try_open_round(d);
            return;
        }
        const long limit = sc_.workload.rounds_target > 0
                               ? std::numeric_limits<long>::max()
                               : sc_.workload.broadcasts_per_node;
        while (next_seq_[static_cast<std::size_t>(i)] < limit && nd.pending_count() == 0) {
            if (sc_.workload.rounds_target > 0 &&
                inc_count_[static_cast<std::size_t>(i)] >= sc_.workload.rounds_target)
                break;
            const Value v =
                "n" + std::to_string(i) + "r" + std::to_string(next_seq_[static_cast<std::size_t>(i)]);
            auto outcome = nd.repeated_broadcast(v);
            if (outcome.result == Node::BroadcastResult::Rejected) break;
            ++next_seq_[static_cast<std::size_t>(i)];
            if (outcome.result == Node::BroadcastResult::Queued) break;
        }
    }

    void drain_node_events(NodeId i, Node& nd) {
        for (auto& f : nd.take_forfeits()) {
            std::vector<std::pair<std::string, std::string>> kv = {
                {"inst", std::to_string(f.instance)}, {"round", std::to_string(f.round)}};
            if (auto e = epoch_of(i, f.instance, f.round))
                kv.push_back({"epoch", std::to_string(*e)});
            trace_.emit(clock_, i, "forfeit", kv);
            withdraw_closure(i, f);
        }
        for (auto& [d, r] : nd.take_opened_rounds()) {
            ++inc_count_[static_cast<std::size_t>(i)];
            epoch_of_round_[{i, d, r}] = inc_count_[static_cast<std::size_t>(i)];
            trace_.emit(clock_, i, "inc", {{"inst", std::to_string(d)}, {"round", std::to_string(r)}});
        }
        for (auto& sb : nd.take_started()) record_bcast(i, sb);
    }

    /// A forfeited round frees its receivers: nobody can deliver it
    /// once the broadcaster recycled it away, so holding the run open
    /// for stragglers would wait forever.
    void withdraw_closure(NodeId i, const Node::ForfeitedRound& f) {
        auto it = closure_.lower_bound({f.instance, i, f.round, Value()});
        while (it != closure_.end() && std::get<0>(it->first) == f.instance &&
               std::get<1>(it->first) == i && std::get<2>(it->first) == f.round) {
            if (it->second.size() < sc_.correct_nodes().size()) --unclosed_;
            it = closure_.erase(it);
        }
    }

    /// Epoch of the latest round the broadcaster opened under this
    /// round number, if any. Round numbers wrap mod B; the epoch count
    /// never does, so it names one repetition unambiguously as long as
    /// no reader lags a full cycle behind. Rounds that were never
    /// opened (corrupted counters fabricate such values) have none.
    std::optional<long> epoch_of(NodeId b, int inst, int round) const {
        auto it = epoch_of_round_.find({b, inst, round});
        if (it == epoch_of_round_.end()) return std::nullopt;
        return it->second;
    }

    void record_bcast(NodeId i, const Node::StartedBroadcast& sb) {
        std::vector<std::pair<std::string, std::string>> kv = {
            {"inst", std::to_string(sb.instance)},
            {"slot", std::to_string(i)},
            {"round", std::to_string(sb.round)},
            {"value", wire::to_hex(sb.value)}};
        if (auto e = epoch_of(i, sb.instance, sb.round))
            kv.push_back({"epoch", std::to_string(*e)});
        trace_.emit(clock_, i, "bcast", kv);
        if (!sc_.is_correct(i)) return;
        // Broadcasts begun before the stabilization cut may lose their
        // value or round number to the recovery itself; only what
        // starts after the cut must close before the run can settle.
        if (sc_.transient.enabled && !cut_emitted_) return;
        auto [it, fresh] = closure_.try_emplace({sb.instance, i, sb.round, sb.value});
        if (fresh) ++unclosed_;
    }

    void record_delivery(NodeId i, const Node::DeliveryEvent& ev) {
        std::vector<std::pair<std::string, std::string>> kv = {
            {"inst", std::to_string(ev.instance)},
            {"slot", std::to_string(ev.slot)},
            {"round", std::to_string(ev.round)},
            {"support", std::to_string(ev.support)},
            {"value", wire::to_hex(ev.value)}};
        if (sc_.is_correct(ev.slot)) {
            if (auto e = epoch_of(ev.slot, ev.instance, ev.round))
                kv.push_back({"epoch", std::to_string(*e)});
        }
        if (ev.conflict) kv.push_back({"conflict", "1"});
        trace_.emit(clock_, i, "deliver", kv);
        if (sc_.mode != Mode::SingleBrbAsync)
            trace_.emit(clock_, i, "fetch",
                        {{"inst", std::to_string(ev.instance)},
                         {"from", std::to_string(ev.slot)},
                         {"round", std::to_string(ev.round)}});
        // Once one correct node delivers from a faulty slot, totality
        // owes the rest the same delivery; hold the run open until
        // they all have it.
        if (!sc_.is_correct(ev.slot)) {
            auto [bit, fresh] = closure_.try_emplace({ev.instance, ev.slot, ev.round, ev.value});
            if (fresh) ++unclosed_;
            (void)bit;
        }
        auto it = closure_.find({ev.instance, ev.slot, ev.round, ev.value});
        if (it != closure_.end() && it->second.insert(i).second &&
            it->second.size() == sc_.correct_nodes().size())
            --unclosed_;
    }

    void poll_node(NodeId i) {
        Node& nd = *nodes_[static_cast<std::size_t>(i)];
        std::vector<Node::DeliveryEvent> evs;
        if (sc_.fifo) {
            for (NodeId k = 0; k < n_; ++k) {
                auto part = nd.fifo_poll(k);
                evs.insert(evs.end(), part.begin(), part.end());
            }
        } else {
            evs = nd.poll();
        }
        for (auto& ev : evs) record_delivery(i, ev);
    }

    void poll_after_message(NodeId i, const WireMessage& m, NodeId from) {
        Node& nd = *nodes_[static_cast<std::size_t>(i)];
        std::set<NodeId> slots = {from};
        for (const auto& [k, v] : m.brb.ready) slots.insert(k);
        std::vector<Node::DeliveryEvent> evs;
        if (sc_.fifo) {
            for (NodeId k : slots) {
                if (k < 0 || k >= n_) continue;
                auto part = nd.fifo_poll(k);
                evs.insert(evs.end(), part.begin(), part.end());
            }
        } else {
            evs = nd.poll_some(m.instance, {slots.begin(), slots.end()});
        }
        for (auto& ev : evs) record_delivery(i, ev);
    }

    void direct_fetch(NodeId i, Node& nd) {
        for (int d = 0; d < nd.delta(); ++d) {
            auto& inst = nd.instance_mut(d);
            for (NodeId k = 0; k < n_; ++k) {
                if (auto r = inst.irc.fetch(k, sc_.params))
                    trace_.emit(clock_, i, "fetch",
                                {{"inst", std::to_string(d)},
                                 {"from", std::to_string(k)},
                                 {"round", std::to_string(*r)}});
            }
        }
    }

    void emit_trusted_changes(NodeId i, Node& nd) {
        auto& cache = trusted_cache_[static_cast<std::size_t>(i)];
        for (int d = 0; d < nd.delta(); ++d) {
            auto cur = nd.trusted_for(d);
            if (cur == cache[static_cast<std::size_t>(d)]) continue;
            cache[static_cast<std::size_t>(d)] = cur;
            std::uint64_t mask = 0;
            for (NodeId j : cur) mask |= 1ull << j;
            trace_.emit(clock_, i, "trusted",
                        {{"inst", std::to_string(d)}, {"set", std::to_string(mask)}});
        }
    }

    bool deliver_one() {
        const std::size_t total = channels_.size();
        std::size_t c = 0;
        bool found = false;
        for (std::size_t probe = 0; probe < total; ++probe) {
            c = (chan_cursor_ + probe) % total;
            if (!channels_[c].empty()) {
                found = true;
                break;
            }
        }
        if (!found) return false;
        chan_cursor_ = (c + 1) % total;
        auto& ch = channels_[c];
        const std::size_t idx = static_cast<std::size_t>(rng_.below(ch.size()));
        InFlight f = ch[idx];
        ch.erase(ch.begin() + static_cast<std::ptrdiff_t>(idx));
        if (rng_.chance(sc_.network.p_loss)) {
            ++dropped_loss_;
            return true;
        }
        if (rng_.chance(sc_.network.p_dup)) {
            ++duplicated_;
            push_channel(ch, f);
        }
        dispatch(static_cast<NodeId>(c % static_cast<std::size_t>(n_)), f);
        return true;
    }

    void dispatch(NodeId to, const InFlight& f) {
        if (!honest(to)) {
            for (auto& o : advs_[static_cast<std::size_t>(to)]->on_message(f.from, f.msg, clock_))
                send(to, o.to, o.msg, kNoRound, true);
            return;
        }
        Node& nd = *nodes_[static_cast<std::size_t>(to)];
        auto reply = nd.on_message(f.from, f.msg);
        if (reply) send(to, reply->to, reply->msg, origin_of(nd, reply->msg.instance), false);
        poll_after_message(to, f.msg, f.from);
        emit_trusted_changes(to, nd);
    }

    int origin_of(const Node& nd, int instance) const {
        if (sc_.mode == Mode::SingleBrbAsync) return kNoRound;
        if (instance < 0 || instance >= nd.delta()) return kNoRound;
        return nd.instance(instance).irc.cur(nd.me());
    }

    /// Channel overflow drops a uniformly random victim among the
    /// queued messages and the incoming one. rule: channel-overflow
    void send(NodeId from, NodeId to, const WireMessage& msg, int origin, bool exempt) {
        if (to < 0 || to >= n_ || to == from) return;
        push_channel(chan(from, to), InFlight{from, msg, origin, exempt});
    }

    void push_channel(std::vector<InFlight>& ch, const InFlight& f) {
        const std::size_t cap = static_cast<std::size_t>(sc_.params.capacity);
        if (ch.size() < cap) {
            ch.push_back(f);
            return;
        }
        const std::size_t r = static_cast<std::size_t>(rng_.below(ch.size() + 1));
        ++dropped_overflow_;
        if (r == ch.size()) return;
        ch.erase(ch.begin() + static_cast<std::ptrdiff_t>(r));
        ch.push_back(f);
    }

    /// Messages whose sender moved more than the lifetime bound past
    /// their send-time round disappear from the network. Disabled in
    /// single-instance mode, which has no rounds. rule: lifetime-purge
    void purge_stale() {
        if (sc_.mode == Mode::SingleBrbAsync) return;
        const Params& p = sc_.params;
        std::uint64_t removed = 0;
        for (NodeId a = 0; a < n_; ++a) {
            if (!honest(a)) continue;
            const Node& nd = *nodes_[static_cast<std::size_t>(a)];
            for (NodeId b = 0; b < n_; ++b) {
                if (b == a) continue;
                auto& ch = chan(a, b);
                auto stale = [&](const InFlight& f) {
                    if (f.exempt) return false;
                    if (f.msg.instance < 0 || f.msg.instance >= nd.delta()) return false;
                    const int now = nd.instance(f.msg.instance).irc.cur(a);
                    const int age = (IrcState::norm(now, p) - IrcState::norm(f.origin, p) +
                                     p.modulus) % p.modulus;
                    return age > p.lambda;
                };
                const auto before = ch.size();
                ch.erase(std::remove_if(ch.begin(), ch.end(), stale), ch.end());
                removed += before - ch.size();
            }
        }
        if (removed > 0) {
            purged_ += removed;
            trace_.emit(clock_, -1, "purge", {{"n", std::to_string(removed)}});
        }
    }

    long current_round() const {
        long r = std::numeric_limits<long>::max();
        for (NodeId i = 0; i < n_; ++i)
            if (honest(i)) r = std::min(r, ticks_[static_cast<std::size_t>(i)]);
        return r == std::numeric_limits<long>::max() ? 0 : r;
    }

    void maybe_roundmark() {
        const long r = current_round();
        if (r <= roundmark_) return;
        roundmark_ = r;
        trace_.emit(clock_, -1, "roundmark", {{"r", std::to_string(r)}});
        for (NodeId i = 0; i < n_; ++i) {
            if (!honest(i)) continue;
            trace_.emit(clock_, i, "consist", {{"ok", consistent_now(i) ? "1" : "0"}});
        }
        if (cut_round_ >= 0 && !cut_emitted_ && r >= cut_round_) {
            cut_emitted_ = true;
            trace_.emit(clock_, -1, "cut", {{"round", std::to_string(r)}});
        }
    }

    /// Joint state-and-channel consistency for one node: its own record
    /// matrix passes the local checks and every in-flight message from a
    /// correct sender, after the receive-side view fence, still merges
    /// without introducing a conflict.
    bool consistent_now(NodeId i) const {
        const Node& nd = *nodes_[static_cast<std::size_t>(i)];
        if (!nd.all_consistent()) return false;
        for (NodeId a = 0; a < n_; ++a) {
            if (a == i || !honest(a) || !sc_.is_correct(a)) continue;
            for (const auto& f : chan(a, i)) {
                if (f.msg.instance < 0 || f.msg.instance >= nd.delta()) return false;
                const auto& inst = nd.instance(f.msg.instance);
                if (sc_.mode == Mode::SingleBrbAsync) {
                    if (!merge_safe(inst.brb.entry(a), f.msg.brb)) return false;
                } else {
                    if (!fenced_merge_safe(inst, a, f.msg)) return false;
                }
            }
        }
        return true;
    }

    /// merge_safe of the view-fenced projection of the message, walked
    /// in place instead of materializing the fenced record. Must agree
    /// with merge_safe over Node::fence_payload; a test pins that.
    bool fenced_merge_safe(const Node::Instance& inst, NodeId from,
                           const WireMessage& w) const {
        const Params& p = sc_.params;
        auto stated = [&](NodeId k) {
            const auto idx = static_cast<std::size_t>(k);
            return idx < w.views.size() ? w.views[idx] : kNoRound;
        };
        auto fresh = [&](NodeId k) {
            return IrcState::norm(stated(k), p) == IrcState::norm(inst.irc.cur(k), p);
        };
        auto survives = [&](const std::pair<NodeId, Value>& pr) {
            return pr.first < 0 || pr.first >= p.n || fresh(pr.first);
        };
        const BrbEntry& mine = inst.brb.entry(from);
        if (fresh(from)) {
            if (w.brb.init.size() > 1) return false;
            if (!w.brb.init.empty() && !mine.init.empty() &&
                *w.brb.init.begin() != *mine.init.begin())
                return false;
        }
        auto clash = [&](const BrbEntry::PairSet& resident, const BrbEntry::PairSet& added) {
            auto res = resident.begin();
            const std::pair<NodeId, Value>* prev = nullptr;
            for (const auto& pr : added) {
                if (!survives(pr)) continue;
                if (prev && prev->first == pr.first) return true;
                while (res != resident.end() && res->first < pr.first) ++res;
                for (auto jt = res; jt != resident.end() && jt->first == pr.first; ++jt)
                    if (jt->second != pr.second) return true;
                prev = &pr;
            }
            return false;
        };
        if (clash(mine.echo, w.brb.echo)) return false;
        return !clash(mine.ready, w.brb.ready);
    }

    /// Would folding `incoming` into `mine` keep one value per
    /// broadcaster? Walks the incoming sets against the resident ones
    /// without building the union.
    static bool merge_safe(const BrbEntry& mine, const BrbEntry& incoming) {
        if (incoming.init.size() > 1) return false;
        if (!incoming.init.empty() && !mine.init.empty() &&
            *incoming.init.begin() != *mine.init.begin())
            return false;
        auto clash = [](const BrbEntry::PairSet& resident, const BrbEntry::PairSet& added) {
            if (BrbEntry::has_conflict(added)) return true;
            auto res = resident.begin();
            for (const auto& pr : added) {
                while (res != resident.end() && res->first < pr.first) ++res;
                for (auto jt = res; jt != resident.end() && jt->first == pr.first; ++jt)
                    if (jt->second != pr.second) return true;
            }
            return false;
        };
        if (clash(mine.echo, incoming.echo)) return false;
        return !clash(mine.ready, incoming.ready);
    }

    void check_settled() {
        if (!sc_.workload.stop_when_settled || done_) return;
        if (sc_.transient.enabled && !cut_emitted_) return;
        for (NodeId i = 0; i < n_; ++i) {
            if (!honest(i)) continue;
            if (sc_.mode != Mode::IrcOnly) {
                const long limit = sc_.workload.rounds_target > 0
                                       ? std::numeric_limits<long>::max()
                                       : sc_.workload.broadcasts_per_node;
                if (next_seq_[static_cast<std::size_t>(i)] < limit &&
                    !(sc_.workload.rounds_target > 0 &&
                      inc_count_[static_cast<std::size_t>(i)] >= sc_.workload.rounds_target))
                    return;
                if (nodes_[static_cast<std::size_t>(i)]->pending_count() > 0) return;
            }
            if (sc_.workload.rounds_target > 0 &&
                inc_count_[static_cast<std::size_t>(i)] < sc_.workload.rounds_target)
                return;
        }
        if (unclosed_ > 0) return;
        done_ = true;
        end_reason_ = "settled";
    }

    /// Full type-correct randomization of the targeted state. Every
    /// value written is in the field's legal domain; nothing here forges
    /// signatures the decoder would refuse.
    void inject_transient() {
        const Params& p = sc_.params;
        std::string scope;
        for (const auto& s : sc_.transient.scope) scope += (scope.empty() ? "" : "+") + s;
        trace_.emit(clock_, -1, "corrupt",
                    {{"scope", scope}, {"inst", std::to_string(sc_.transient.instance)}});
        const bool all = sc_.transient.scope.count("all") > 0;
        auto in_scope = [&](const char* s) { return all || sc_.transient.scope.count(s) > 0; };
        const int only = sc_.transient.instance;

        for (NodeId i = 0; i < n_; ++i) {
            if (!honest(i)) continue;
            Node& nd = *nodes_[static_cast<std::size_t>(i)];
            for (int d = 0; d < nd.delta(); ++d) {
                if (only >= 0 && d != only) continue;
                auto& inst = nd.instance_mut(d);
                if (in_scope("brb")) {
                    for (NodeId k = 0; k < n_; ++k) {
                        BrbEntry& e = inst.brb.entry_mut(k);
                        e.init.clear();
                        e.echo.clear();
                        e.ready.clear();
                        const int inits = static_cast<int>(rng_.below(2));
                        for (int x = 0; x < inits; ++x) e.init.insert(random_value());
                        const int echoes = static_cast<int>(rng_.below(4));
                        for (int x = 0; x < echoes; ++x) e.echo.insert({random_node(), random_value()});
                        const int readies = static_cast<int>(rng_.below(4));
                        for (int x = 0; x < readies; ++x) e.ready.insert({random_node(), random_value()});
                    }
                }
                if (in_scope("wasdelivered"))
                    for (NodeId k = 0; k < n_; ++k) inst.brb.set_delivered(k, rng_.below(2) == 1);
                if (in_scope("irc")) {
                    for (NodeId k = 0; k < n_; ++k) {
                        inst.irc.cur_mut(k) = random_round();
                        inst.irc.nxt_mut(k) = random_round();
                        inst.irc.lbl_mut(k) = static_cast<int>(
                            rng_.below(static_cast<std::uint64_t>(p.modulus) + 1));
                    }
                }
                if (in_scope("muteness")) {
                    for (NodeId k = 0; k < n_; ++k)
                        for (NodeId j = 0; j < n_; ++j)
                            inst.mute.rt_mut(k, j) = static_cast<int>(
                                rng_.below(static_cast<std::uint64_t>(p.modulus) + 1));
                }
            }
        }

        if (in_scope("channels")) {
            for (NodeId a = 0; a < n_; ++a) {
                for (NodeId b = 0; b < n_; ++b) {
                    if (a == b || !honest(a) || !honest(b)) continue;
                    auto& ch = chan(a, b);
                    if (only >= 0) {
                        for (auto& f : ch)
                            if (f.msg.instance == only) randomize_message(f, a);
                    } else {
                        ch.clear();
                        const std::size_t fill = rng_.below(static_cast<std::uint64_t>(p.capacity) + 1);
                        for (std::size_t x = 0; x < fill; ++x) {
                            InFlight f;
                            f.from = a;
                            randomize_message(f, a);
                            f.msg.instance = static_cast<int>(
                                rng_.below(static_cast<std::uint64_t>(p.delta)));
                            ch.push_back(f);
                        }
                    }
                }
            }
        }

        corrupt_round_ = current_round();
        cut_round_ = corrupt_round_ + sc_.settle_rounds;
    }

    void randomize_message(InFlight& f, NodeId from) {
        f.origin = random_round();
        f.exempt = false;
        f.msg.brb.init.clear();
        f.msg.brb.echo.clear();
        f.msg.brb.ready.clear();
        const int inits = static_cast<int>(rng_.below(2));
        for (int x = 0; x < inits; ++x) f.msg.brb.init.insert(random_value());
        const int echoes = static_cast<int>(rng_.below(4));
        for (int x = 0; x < echoes; ++x) f.msg.brb.echo.insert({random_node(), random_value()});
        const int readies = static_cast<int>(rng_.below(4));
        for (int x = 0; x < readies; ++x) f.msg.brb.ready.insert({random_node(), random_value()});
        f.msg.irc.ack = rng_.below(2) == 0;
        f.msg.irc.seq = random_round();
        f.msg.irc.lbl = static_cast<int>(rng_.below(static_cast<std::uint64_t>(sc_.params.modulus) + 1));
        f.msg.views.clear();
        const auto vlen = rng_.below(static_cast<std::uint64_t>(n_) + 2);
        for (std::uint64_t x = 0; x < vlen; ++x) f.msg.views.push_back(random_round());
        (void)from;
    }

    int random_round() {
        return static_cast<int>(rng_.below(static_cast<std::uint64_t>(sc_.params.modulus) + 1)) - 1;
    }

    NodeId random_node() { return static_cast<NodeId>(rng_.below(static_cast<std::uint64_t>(n_))); }

    Value random_value() {
        switch (rng_.below(6)) {
            case 0: return sc_.adversary.value_a;
            case 1: return sc_.adversary.value_b;
            case 2: return "x0";
            case 3: return "x1";
            default:
                return "n" + std::to_string(rng_.below(static_cast<std::uint64_t>(n_))) + "r" +
                       std::to_string(rng_.below(4));
        }
    }

    Scenario sc_;
    std::uint64_t seed_;
    Rng rng_;
    int n_;
    long grace_ = 200;

    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<std::unique_ptr<Adversary>> advs_;
    std::vector<std::vector<InFlight>> channels_;
    std::vector<std::vector<std::vector<NodeId>>> trusted_cache_;

    Trace trace_;
    long clock_ = 0;
    bool done_ = false;
    std::string end_reason_;

    std::vector<long> last_tick_;
    std::vector<long> ticks_;
    std::vector<long> inc_count_;
    std::vector<long> next_seq_;
    NodeId tick_cursor_ = 0;
    std::size_t chan_cursor_ = 0;

    long roundmark_ = -1;
    long corrupt_round_ = -1;
    long cut_round_ = -1;
    bool cut_emitted_ = false;

    std::map<std::tuple<int, NodeId, int, Value>, std::set<NodeId>> closure_;
    long unclosed_ = 0;
    std::map<std::tuple<NodeId, int, int>, long> epoch_of_round_;

    long max_tick_gap_ = 0;
    long forced_ticks_ = 0;
    std::uint64_t dropped_overflow_ = 0;
    std::uint64_t dropped_loss_ = 0;
    std::uint64_t duplicated_ = 0;
    std::uint64_t purged_ = 0;
};

}  // namespace ssbrb
