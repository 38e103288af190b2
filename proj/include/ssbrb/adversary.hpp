#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "ssbrb/node.hpp"
#include "ssbrb/rng.hpp"
#include "ssbrb/scenario.hpp"

namespace ssbrb {

/// A faulty node under one of the scripted strategies. Every message it
/// produces is type-correct: the harness only models faults the decoder
/// would accept, since malformed bytes are dropped at the boundary.
class Adversary {
public:
    Adversary(NodeId me, Strategy strategy, const Scenario& sc, std::uint64_t seed)
        : me_(me),
          strategy_(strategy),
          params_(sc.params),
          value_a_(sc.adversary.value_a),
          value_b_(sc.adversary.value_b),
          at_step_(sc.adversary.at_step),
          rng_(seed) {
        if (strategy_ == Strategy::MuteAfter || strategy_ == Strategy::CrashAt) {
            Node::Config cfg;
            cfg.availability = sc.mode == Mode::SingleBrbAsync ? Node::Availability::Always
                                                               : Node::Availability::Recycled;
            cfg.trust_all_peers = sc.trust_all_peers;
            cfg.queue_depth = sc.workload.queue_depth;
            inner_ = std::make_unique<Node>(me_, params_, cfg);
        }
    }

    NodeId me() const { return me_; }
    Strategy strategy() const { return strategy_; }

    std::vector<Node::Outgoing> tick(long clock) {
        switch (strategy_) {
            case Strategy::EquivocateInit: return equivocate_tick();
            case Strategy::FakeReady: return fake_ready_tick();
            case Strategy::SpeculativeAck: return speculative_tick();
            case Strategy::MuteAfter: return mute_after_tick(clock);
            case Strategy::CrashAt: return crash_tick(clock);
            case Strategy::ByzRandom: return random_tick();
        }
        return {};
    }

    std::vector<Node::Outgoing> on_message(NodeId from, const WireMessage& m, long clock) {
        switch (strategy_) {
            case Strategy::SpeculativeAck: return speculative_reply(from, m);
            case Strategy::MuteAfter:
                if (clock < at_step_ && inner_) return delegate(from, m);
                return {};
            case Strategy::CrashAt:
                if (clock < at_step_ && inner_) return delegate(from, m);
                return {};
            case Strategy::ByzRandom:
                if (rng_.below(4) == 0) return {random_message_to(from)};
                return {};
            case Strategy::FakeReady:
                if (m.irc.ack) last_seq_[{from, m.instance}] = m.irc.seq;
                return {};
            case Strategy::EquivocateInit: return {};
        }
        return {};
    }

private:
    std::vector<Node::Outgoing> delegate(NodeId from, const WireMessage& m) {
        auto reply = inner_->on_message(from, m);
        inner_->poll();
        if (reply) return {*reply};
        return {};
    }

    /// Announces one value to half the peers and another to the rest,
    /// with matching echo and ready pairs for its own slot. The round
    /// field crawls forward so repeated-broadcast scenarios see several
    /// equivocating rounds from the same node.
    std::vector<Node::Outgoing> equivocate_tick() {
        ++ticks_;
        const int seq = (ticks_ / 48) % params_.modulus;
        std::vector<Node::Outgoing> out;
        for (NodeId j = 0; j < params_.n; ++j) {
            if (j == me_) continue;
            const Value& v = (j % 2 == 0) ? value_a_ : value_b_;
            WireMessage m;
            m.instance = instance_cursor();
            m.brb.init.insert(v);
            m.brb.echo.insert({me_, v});
            m.brb.ready.insert({me_, v});
            m.irc = IrcWire{true, seq, 0};
            m.views.assign(static_cast<std::size_t>(params_.n), kNoRound);
            m.views[static_cast<std::size_t>(me_)] = seq;
            out.push_back({j, m});
        }
        return out;
    }

    /// Claims ready (and echo) pairs for every other broadcaster with a
    /// value nobody proposed, stamped with the freshest round it has
    /// heard each broadcaster announce so the claims pass view fencing.
    std::vector<Node::Outgoing> fake_ready_tick() {
        ++ticks_;
        const int seq = (ticks_ / 48) % params_.modulus;
        WireMessage m;
        m.instance = instance_cursor();
        m.views.assign(static_cast<std::size_t>(params_.n), kNoRound);
        m.views[static_cast<std::size_t>(me_)] = seq;
        for (NodeId k = 0; k < params_.n; ++k) {
            if (k == me_) continue;
            m.brb.echo.insert({k, value_b_});
            m.brb.ready.insert({k, value_b_});
            if (auto it = last_seq_.find({k, m.instance}); it != last_seq_.end())
                m.views[static_cast<std::size_t>(k)] = it->second;
        }
        m.irc = IrcWire{true, seq, 0};
        std::vector<Node::Outgoing> out;
        for (NodeId j = 0; j < params_.n; ++j)
            if (j != me_) out.push_back({j, m});
        return out;
    }

    /// Acknowledges every announcement instantly, without ever fetching,
    /// and floods a small burst of label guesses ahead of the echoed one.
    std::vector<Node::Outgoing> speculative_reply(NodeId from, const WireMessage& m) {
        if (!m.irc.ack) return {};
        seen_[{from, m.instance}] = m.irc;
        std::vector<Node::Outgoing> out;
        for (int ahead = 0; ahead <= 2; ++ahead) {
            WireMessage reply;
            reply.instance = m.instance;
            reply.irc = IrcWire{false, m.irc.seq, std::min(params_.modulus, m.irc.lbl + ahead)};
            out.push_back({from, reply});
        }
        return out;
    }

    std::vector<Node::Outgoing> speculative_tick() {
        ++ticks_;
        std::vector<Node::Outgoing> out;
        for (const auto& [key, w] : seen_) {
            WireMessage reply;
            reply.instance = key.second;
            reply.irc = IrcWire{false, w.seq, w.lbl};
            out.push_back({key.first, reply});
        }
        return out;
    }

    /// Honest until the trigger step, then keeps emitting round-frozen
    /// chatter while never acknowledging anything.
    std::vector<Node::Outgoing> mute_after_tick(long clock) {
        if (clock < at_step_ && inner_) {
            auto outs = inner_->tick();
            inner_->poll();
            if (!outs.empty()) frozen_seq_ = outs.front().msg.irc.seq;
            return outs;
        }
        std::vector<Node::Outgoing> out;
        for (NodeId j = 0; j < params_.n; ++j) {
            if (j == me_) continue;
            WireMessage m;
            m.instance = instance_cursor();
            m.irc = IrcWire{true, frozen_seq_, 0};
            out.push_back({j, m});
        }
        ++ticks_;
        return out;
    }

    std::vector<Node::Outgoing> crash_tick(long clock) {
        if (clock < at_step_ && inner_) {
            auto outs = inner_->tick();
            inner_->poll();
            return outs;
        }
        return {};
    }

    std::vector<Node::Outgoing> random_tick() {
        ++ticks_;
        std::vector<Node::Outgoing> out;
        for (NodeId j = 0; j < params_.n; ++j)
            if (j != me_) out.push_back(random_message_to(j));
        return out;
    }

    Node::Outgoing random_message_to(NodeId j) {
        WireMessage m;
        m.instance = static_cast<int>(rng_.below(static_cast<std::uint64_t>(params_.delta)));
        if (rng_.below(2) == 0) m.brb.init.insert(random_value());
        const int echoes = static_cast<int>(rng_.below(4));
        for (int x = 0; x < echoes; ++x)
            m.brb.echo.insert({random_node(), random_value()});
        const int readies = static_cast<int>(rng_.below(4));
        for (int x = 0; x < readies; ++x)
            m.brb.ready.insert({random_node(), random_value()});
        m.irc.ack = rng_.below(2) == 0;
        m.irc.seq = static_cast<int>(rng_.below(static_cast<std::uint64_t>(params_.modulus) + 1)) - 1;
        m.irc.lbl = static_cast<int>(rng_.below(static_cast<std::uint64_t>(params_.modulus) + 1));
        const auto vlen = rng_.below(static_cast<std::uint64_t>(params_.n) + 2);
        for (std::uint64_t x = 0; x < vlen; ++x)
            m.views.push_back(
                static_cast<int>(rng_.below(static_cast<std::uint64_t>(params_.modulus) + 1)) - 1);
        return {j, m};
    }

    NodeId random_node() { return static_cast<NodeId>(rng_.below(static_cast<std::uint64_t>(params_.n))); }

    Value random_value() {
        switch (rng_.below(4)) {
            case 0: return value_a_;
            case 1: return value_b_;
            case 2: return "x0";
            default: return "x1";
        }
    }

    int instance_cursor() { return static_cast<int>(ticks_) % std::max(1, params_.delta); }

    NodeId me_;
    Strategy strategy_;
    Params params_;
    Value value_a_;
    Value value_b_;
    long at_step_ = 0;
    Rng rng_;
    long ticks_ = 0;
    int frozen_seq_ = kNoRound;
    std::map<std::pair<NodeId, int>, IrcWire> seen_;
    std::map<std::pair<NodeId, int>, int> last_seq_;
    std::unique_ptr<Node> inner_;
};

}  // namespace ssbrb
