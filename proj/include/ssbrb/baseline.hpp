#pragma once

#include <map>
#include <set>
#include <vector>

#include "ssbrb/params.hpp"
#include "ssbrb/rng.hpp"
#include "ssbrb/trace.hpp"
#include "ssbrb/wire.hpp"

namespace ssbrb {

/// Message type of the classic event-driven broadcast algorithms,
/// used as reference oracles under reliable channels.
struct BaselineMsg {
    enum Kind { Init, Echo, Ready } kind = Init;
    NodeId broadcaster = 0;
    Value value;
};

struct BaselineOut {
    std::vector<BaselineMsg> broadcasts;                 // send to every node
    std::vector<std::pair<NodeId, Value>> deliveries;    // (broadcaster, value)
};

/// No-duplicity broadcast: echo once per broadcaster, deliver on an
/// echo quorum of strictly more than (n+t)/2 distinct senders.
class NdNode {
public:
    NdNode() = default;
    NdNode(NodeId me, const Params& p)
        : me_(me), p_(p), seen_init_(static_cast<std::size_t>(p.n), 0) {}

    BaselineOut broadcast(const Value& v) {
        BaselineOut out;
        out.broadcasts.push_back({BaselineMsg::Init, me_, v});
        return out;
    }

    BaselineOut handle(NodeId from, const BaselineMsg& m) {
        BaselineOut out;
        switch (m.kind) {
            case BaselineMsg::Init:
                // Only the broadcaster's own init counts, first one wins.
                if (from == m.broadcaster && !seen_init_[static_cast<std::size_t>(m.broadcaster)]) {
                    seen_init_[static_cast<std::size_t>(m.broadcaster)] = 1;
                    out.broadcasts.push_back({BaselineMsg::Echo, m.broadcaster, m.value});
                }
                break;
            case BaselineMsg::Echo: {
                auto& senders = echoes_[{m.broadcaster, m.value}];
                senders.insert(from);
                if (p_.echo_quorum_met_strict(static_cast<int>(senders.size())) &&
                    !delivered_.count(m.broadcaster)) {
                    delivered_[m.broadcaster] = m.value;
                    out.deliveries.push_back({m.broadcaster, m.value});
                }
                break;
            }
            case BaselineMsg::Ready:
                break;  // not part of this algorithm
        }
        return out;
    }

    const std::map<NodeId, Value>& delivered() const { return delivered_; }

private:
    NodeId me_ = 0;
    Params p_;
    std::vector<char> seen_init_;
    std::map<std::pair<NodeId, Value>, std::set<NodeId>> echoes_;
    std::map<NodeId, Value> delivered_;
};

/// The echo/ready broadcast oracle: echo on first init, ready on an
/// echo quorum or t+1 matching readies, deliver on 2t+1 readies.
class BtNode {
public:
    BtNode() = default;
    BtNode(NodeId me, const Params& p)
        : me_(me), p_(p), seen_init_(static_cast<std::size_t>(p.n), 0),
          sent_ready_(static_cast<std::size_t>(p.n), 0) {}

    BaselineOut broadcast(const Value& v) {
        BaselineOut out;
        out.broadcasts.push_back({BaselineMsg::Init, me_, v});
        return out;
    }

    BaselineOut handle(NodeId from, const BaselineMsg& m) {
        BaselineOut out;
        const auto k = static_cast<std::size_t>(m.broadcaster);
        switch (m.kind) {
            case BaselineMsg::Init:
                if (from == m.broadcaster && !seen_init_[k]) {
                    seen_init_[k] = 1;
                    out.broadcasts.push_back({BaselineMsg::Echo, m.broadcaster, m.value});
                }
                break;
            case BaselineMsg::Echo: {
                auto& senders = echoes_[{m.broadcaster, m.value}];
                senders.insert(from);
                if (p_.echo_quorum_met_strict(static_cast<int>(senders.size())) && !sent_ready_[k]) {
                    sent_ready_[k] = 1;
                    out.broadcasts.push_back({BaselineMsg::Ready, m.broadcaster, m.value});
                }
                break;
            }
            case BaselineMsg::Ready: {
                auto& senders = readies_[{m.broadcaster, m.value}];
                senders.insert(from);
                const int count = static_cast<int>(senders.size());
                if (count >= p_.ready_relay_threshold() && !sent_ready_[k]) {
                    sent_ready_[k] = 1;
                    out.broadcasts.push_back({BaselineMsg::Ready, m.broadcaster, m.value});
                }
                if (count >= p_.deliver_threshold_strict() && !delivered_.count(m.broadcaster)) {
                    delivered_[m.broadcaster] = m.value;
                    out.deliveries.push_back({m.broadcaster, m.value});
                }
                break;
            }
        }
        return out;
    }

    const std::map<NodeId, Value>& delivered() const { return delivered_; }

private:
    NodeId me_ = 0;
    Params p_;
    std::vector<char> seen_init_;
    std::vector<char> sent_ready_;
    std::map<std::pair<NodeId, Value>, std::set<NodeId>> echoes_;
    std::map<std::pair<NodeId, Value>, std::set<NodeId>> readies_;
    std::map<NodeId, Value> delivered_;
};

/// Runs a sequence of broadcast phases under reliable channels with
/// seeded random delivery order. Each phase starts fresh single-shot
/// nodes (the classic algorithms do not recycle), gives every node at
/// most one value, and runs to quiescence; the phase index is emitted
/// as the round of its broadcast and delivery events. One accumulated
/// trace comes back, with the standard header events so the checkers
/// can read it like any other run.
template <class NodeT>
inline Trace run_reliable_phases(const Params& p, const std::vector<std::vector<Value>>& phases,
                                 std::uint64_t seed) {
    struct InFlight {
        NodeId from, to;
        BaselineMsg msg;
    };

    Trace trace;
    long step = 0;
    trace.emit(step, -1, "config",
               {{"mode", "baseline"},
                {"n", std::to_string(p.n)},
                {"t", std::to_string(p.t)},
                {"delta", "1"},
                {"horizon", "0"},
                {"grace", "0"}});
    trace.emit(step, -1, "seed", {{"s", std::to_string(seed)}});
    trace.emit(step, -1, "correct",
               {{"set", std::to_string((1u << static_cast<unsigned>(p.n)) - 1)}});

    Rng rng(seed);
    for (std::size_t phase = 0; phase < phases.size(); ++phase) {
        const auto& values = phases[phase];
        std::vector<NodeT> nodes;
        nodes.reserve(static_cast<std::size_t>(p.n));
        for (NodeId i = 0; i < p.n; ++i) nodes.emplace_back(i, p);

        std::vector<InFlight> flight;
        auto send_all = [&](NodeId from, const std::vector<BaselineMsg>& msgs) {
            for (const auto& m : msgs)
                for (NodeId to = 0; to < p.n; ++to) flight.push_back({from, to, m});
        };

        for (NodeId i = 0; i < p.n; ++i) {
            if (static_cast<std::size_t>(i) >= values.size()) break;
            trace.emit(step, i, "bcast",
                       {{"inst", "0"},
                        {"slot", std::to_string(i)},
                        {"round", std::to_string(phase)},
                        {"value", wire::to_hex(values[static_cast<std::size_t>(i)])}});
            send_all(i, nodes[static_cast<std::size_t>(i)]
                            .broadcast(values[static_cast<std::size_t>(i)])
                            .broadcasts);
        }

        while (!flight.empty()) {
            ++step;
            const std::size_t pick = static_cast<std::size_t>(rng.below(flight.size()));
            const InFlight msg = flight[pick];
            flight[pick] = flight.back();
            flight.pop_back();
            BaselineOut out = nodes[static_cast<std::size_t>(msg.to)].handle(msg.from, msg.msg);
            for (const auto& [slot, value] : out.deliveries) {
                trace.emit(step, msg.to, "deliver",
                           {{"inst", "0"},
                            {"slot", std::to_string(slot)},
                            {"round", std::to_string(phase)},
                            {"support", "0"},
                            {"value", wire::to_hex(value)}});
            }
            send_all(msg.to, out.broadcasts);
        }
    }
    trace.emit(step, -1, "end", {{"steps", std::to_string(step)}, {"reason", "quiescent"}});
    return trace;
}

/// One broadcast per node, single phase.
template <class NodeT>
inline Trace run_reliable(const Params& p, const std::vector<Value>& values,
                          std::uint64_t seed) {
    return run_reliable_phases<NodeT>(p, {values}, seed);
}

}  // namespace ssbrb
