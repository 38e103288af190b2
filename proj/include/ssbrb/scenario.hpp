#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ssbrb/params.hpp"

namespace ssbrb {

enum class Mode { SingleBrbAsync, IrcOnly, Integrated, BaselineDifferential };

enum class Strategy { EquivocateInit, FakeReady, SpeculativeAck, MuteAfter, CrashAt, ByzRandom };

struct AdversaryCfg {
    std::map<NodeId, Strategy> nodes;
    Value value_a = "A";
    Value value_b = "B";
    long at_step = 0;  // activation step for mute-after / crash-at
};

struct NetworkCfg {
    double p_loss = 0.0;
    double p_dup = 0.0;
    int fairness_window = 64;  // every correct node ticks once per window
    long horizon = 50000;
};

struct TransientCfg {
    bool enabled = false;
    long at_step = 0;
    std::set<std::string> scope = {"all"};  // brb, wasdelivered, irc, muteness, channels
    int instance = -1;                      // restrict to one instance, -1 = all
};

struct WorkloadCfg {
    int broadcasts_per_node = 1;
    int rounds_target = 0;          // stop once every correct node opened this many rounds
    std::size_t queue_depth = 16;
    bool stop_when_settled = true;  // stop early once every expected delivery happened
};

struct Scenario {
    Params params;
    Mode mode = Mode::Integrated;
    AdversaryCfg adversary;
    NetworkCfg network;
    TransientCfg transient;
    WorkloadCfg workload;
    bool fifo = false;
    int settle_rounds = 10;   // do-forever rounds granted to stabilize after corruption
    int converge_budget = 0;  // consistency deadline in sampling rounds; 0 = settle_rounds
    bool reply_only_to_ack_requests = false;
    bool trust_all_peers = false;
    std::vector<std::uint64_t> seeds = {1};
    std::set<std::string> checks;  // empty = every checker that applies to the mode

    bool is_correct(NodeId i) const { return !adversary.nodes.count(i); }

    std::vector<NodeId> correct_nodes() const {
        std::vector<NodeId> out;
        for (NodeId i = 0; i < params.n; ++i)
            if (is_correct(i)) out.push_back(i);
        return out;
    }

    /// Canonical one-line-per-key dump, embedded in trace headers so a
    /// trace pins the exact configuration it came from.
    std::string canonical() const;
};

struct ParseError {
    int line = 0;  // 0 = file-level
    std::string message;
};

struct ScenarioParseResult {
    std::optional<Scenario> scenario;
    std::vector<ParseError> errors;

    bool ok() const { return scenario.has_value() && errors.empty(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        const std::string item = trim(s.substr(pos, comma - pos));
        if (!item.empty()) out.push_back(item);
        pos = comma + 1;
    }
    return out;
}

inline std::optional<long> to_long(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        long v = std::stol(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

inline std::optional<double> to_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

inline std::optional<bool> to_bool(const std::string& s) {
    if (s == "true" || s == "on" || s == "1") return true;
    if (s == "false" || s == "off" || s == "0") return false;
    return std::nullopt;
}

inline std::optional<Mode> to_mode(const std::string& s) {
    if (s == "single-brb-async") return Mode::SingleBrbAsync;
    if (s == "irc-only") return Mode::IrcOnly;
    if (s == "integrated") return Mode::Integrated;
    if (s == "baseline-differential") return Mode::BaselineDifferential;
    return std::nullopt;
}

inline const char* mode_name(Mode m) {
    switch (m) {
        case Mode::SingleBrbAsync: return "single-brb-async";
        case Mode::IrcOnly: return "irc-only";
        case Mode::Integrated: return "integrated";
        case Mode::BaselineDifferential: return "baseline-differential";
    }
    return "?";
}

inline std::optional<Strategy> to_strategy(const std::string& s) {
    if (s == "equivocate-init") return Strategy::EquivocateInit;
    if (s == "fake-ready") return Strategy::FakeReady;
    if (s == "speculative-ack") return Strategy::SpeculativeAck;
    if (s == "mute-after") return Strategy::MuteAfter;
    if (s == "crash-at") return Strategy::CrashAt;
    if (s == "byz-random") return Strategy::ByzRandom;
    return std::nullopt;
}

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::EquivocateInit: return "equivocate-init";
        case Strategy::FakeReady: return "fake-ready";
        case Strategy::SpeculativeAck: return "speculative-ack";
        case Strategy::MuteAfter: return "mute-after";
        case Strategy::CrashAt: return "crash-at";
        case Strategy::ByzRandom: return "byz-random";
    }
    return "?";
}

/// 1..100 ranges or comma lists.
inline std::optional<std::vector<std::uint64_t>> to_seeds(const std::string& s) {
    const std::size_t dots = s.find("..");
    if (dots != std::string::npos) {
        auto lo = to_long(trim(s.substr(0, dots)));
        auto hi = to_long(trim(s.substr(dots + 2)));
        if (!lo || !hi || *lo < 0 || *hi < *lo) return std::nullopt;
        std::vector<std::uint64_t> out;
        for (long v = *lo; v <= *hi; ++v) out.push_back(static_cast<std::uint64_t>(v));
        return out;
    }
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(s)) {
        auto v = to_long(item);
        if (!v || *v < 0) return std::nullopt;
        out.push_back(static_cast<std::uint64_t>(*v));
    }
    if (out.empty()) return std::nullopt;
    return out;
}

}  // namespace detail

inline std::string Scenario::canonical() const {
    auto b = [](bool v) { return v ? "true" : "false"; };
    std::vector<std::string> lines;
    lines.push_back("mode=" + std::string(detail::mode_name(mode)));
    lines.push_back("params.n=" + std::to_string(params.n));
    lines.push_back("params.t=" + std::to_string(params.t));
    lines.push_back("params.capacity=" + std::to_string(params.capacity));
    lines.push_back("params.lambda=" + std::to_string(params.lambda));
    lines.push_back("params.modulus=" + std::to_string(params.modulus));
    lines.push_back("params.theta=" + std::to_string(params.theta));
    lines.push_back("params.delta=" + std::to_string(params.delta));
    for (const auto& [id, strat] : adversary.nodes)
        lines.push_back("adversary.node." + std::to_string(id) + "=" +
                        detail::strategy_name(strat));
    if (!adversary.nodes.empty()) {
        lines.push_back("adversary.at_step=" + std::to_string(adversary.at_step));
        lines.push_back("adversary.value_a=" + adversary.value_a);
        lines.push_back("adversary.value_b=" + adversary.value_b);
    }
    lines.push_back("network.p_loss=" + std::to_string(network.p_loss));
    lines.push_back("network.p_dup=" + std::to_string(network.p_dup));
    lines.push_back("network.fairness_window=" + std::to_string(network.fairness_window));
    lines.push_back("network.horizon=" + std::to_string(network.horizon));
    if (transient.enabled) {
        lines.push_back("transient.at_step=" + std::to_string(transient.at_step));
        std::string scope;
        for (const auto& s : transient.scope) scope += (scope.empty() ? "" : ",") + s;
        lines.push_back("transient.scope=" + scope);
        lines.push_back("transient.instance=" + std::to_string(transient.instance));
    }
    lines.push_back("workload.broadcasts_per_node=" + std::to_string(workload.broadcasts_per_node));
    lines.push_back("workload.rounds_target=" + std::to_string(workload.rounds_target));
    lines.push_back("workload.queue_depth=" + std::to_string(workload.queue_depth));
    lines.push_back("workload.stop_when_settled=" + std::string(b(workload.stop_when_settled)));
    lines.push_back("fifo.enabled=" + std::string(b(fifo)));
    lines.push_back("settle.rounds=" + std::to_string(settle_rounds));
    if (converge_budget > 0)
        lines.push_back("converge.budget=" + std::to_string(converge_budget));
    lines.push_back("reply_only_to_ack_requests=" + std::string(b(reply_only_to_ack_requests)));
    lines.push_back("trust_all_peers=" + std::string(b(trust_all_peers)));
    if (params.mutations.any()) {
        lines.push_back("mutation.deliver_quorum_delta=" +
                        std::to_string(params.mutations.deliver_quorum_delta));
        lines.push_back("mutation.echo_quorum_delta=" +
                        std::to_string(params.mutations.echo_quorum_delta));
        lines.push_back("mutation.skip_label_reset=" +
                        std::string(b(params.mutations.skip_label_reset)));
    }
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += ';';
    }
    return out;
}

/// Parses the flat `section.key = value` scenario format. `#` starts a
/// comment. Unknown keys, duplicate keys, and malformed values are
/// reported with their line numbers; semantic constraint violations
/// are reported as line 0.
inline ScenarioParseResult parse_scenario(const std::string& text) {
    using namespace detail;
    ScenarioParseResult res;
    Scenario sc;
    sc.checks.clear();
    std::map<std::string, int> seen;  // key -> first line
    bool transient_mentioned = false;

    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (eol == text.size() && line.empty() && pos > text.size()) break;

        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            res.errors.push_back({lineno, "expected key = value"});
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            res.errors.push_back({lineno, "missing key before '='"});
            continue;
        }
        auto [it, fresh] = seen.emplace(key, lineno);
        if (!fresh) {
            res.errors.push_back({lineno, "duplicate key '" + key + "' (first set on line " +
                                              std::to_string(it->second) + ")"});
            continue;
        }

        auto bad = [&](const std::string& why) { res.errors.push_back({lineno, why}); };
        auto want_int = [&](int& target, long lo, long hi) {
            auto v = to_long(value);
            if (!v || *v < lo || *v > hi)
                bad("'" + key + "' needs an integer in [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
            else
                target = static_cast<int>(*v);
        };
        auto want_long = [&](long& target, long lo) {
            auto v = to_long(value);
            if (!v || *v < lo)
                bad("'" + key + "' needs an integer >= " + std::to_string(lo));
            else
                target = *v;
        };
        auto want_bool = [&](bool& target) {
            auto v = to_bool(value);
            if (!v)
                bad("'" + key + "' needs true or false");
            else
                target = *v;
        };

        if (key == "mode") {
            auto m = to_mode(value);
            if (!m)
                bad("unknown mode '" + value + "'");
            else
                sc.mode = *m;
        } else if (key == "params.n") {
            want_int(sc.params.n, 1, 1024);
        } else if (key == "params.t") {
            want_int(sc.params.t, 0, 1024);
        } else if (key == "params.capacity") {
            want_int(sc.params.capacity, 1, 1 << 20);
        } else if (key == "params.lambda") {
            want_int(sc.params.lambda, 1, 1 << 20);
        } else if (key == "params.modulus") {
            want_int(sc.params.modulus, 1, 1 << 24);
        } else if (key == "params.theta") {
            want_int(sc.params.theta, 1, 1 << 24);
        } else if (key == "params.delta") {
            want_int(sc.params.delta, 1, 64);
        } else if (key.rfind("adversary.node.", 0) == 0) {
            auto id = to_long(key.substr(15));
            auto strat = to_strategy(value);
            if (!id)
                bad("bad node id in '" + key + "'");
            else if (!strat)
                bad("unknown adversary strategy '" + value + "'");
            else
                sc.adversary.nodes[static_cast<NodeId>(*id)] = *strat;
        } else if (key == "adversary.value_a") {
            sc.adversary.value_a = value;
        } else if (key == "adversary.value_b") {
            sc.adversary.value_b = value;
        } else if (key == "adversary.at_step") {
            want_long(sc.adversary.at_step, 0);
        } else if (key == "network.p_loss" || key == "network.p_dup") {
            auto v = to_double(value);
            if (!v || *v < 0.0 || *v >= 1.0)
                bad("'" + key + "' needs a probability in [0, 1)");
            else
                (key == "network.p_loss" ? sc.network.p_loss : sc.network.p_dup) = *v;
        } else if (key == "network.fairness_window") {
            want_int(sc.network.fairness_window, 1, 1 << 20);
        } else if (key == "network.horizon") {
            want_long(sc.network.horizon, 1);
        } else if (key == "transient.at_step") {
            transient_mentioned = true;
            want_long(sc.transient.at_step, 0);
        } else if (key == "transient.scope") {
            transient_mentioned = true;
            sc.transient.scope.clear();
            for (const auto& item : split_list(value)) {
                if (item != "all" && item != "brb" && item != "wasdelivered" && item != "irc" &&
                    item != "muteness" && item != "channels") {
                    bad("unknown transient scope '" + item + "'");
                } else {
                    sc.transient.scope.insert(item);
                }
            }
        } else if (key == "transient.instance") {
            transient_mentioned = true;
            want_int(sc.transient.instance, -1, 63);
        } else if (key == "workload.broadcasts_per_node") {
            want_int(sc.workload.broadcasts_per_node, 0, 1 << 20);
        } else if (key == "workload.rounds_target") {
            want_int(sc.workload.rounds_target, 0, 1 << 20);
        } else if (key == "workload.queue_depth") {
            int depth = 16;
            want_int(depth, 1, 1 << 20);
            sc.workload.queue_depth = static_cast<std::size_t>(depth);
        } else if (key == "workload.stop_when_settled") {
            want_bool(sc.workload.stop_when_settled);
        } else if (key == "fifo.enabled") {
            want_bool(sc.fifo);
        } else if (key == "settle.rounds") {
            want_int(sc.settle_rounds, 0, 1 << 20);
        } else if (key == "converge.budget") {
            want_int(sc.converge_budget, 0, 1 << 20);
        } else if (key == "reply_only_to_ack_requests") {
            want_bool(sc.reply_only_to_ack_requests);
        } else if (key == "trust_all_peers") {
            want_bool(sc.trust_all_peers);
        } else if (key == "seeds") {
            auto seeds = to_seeds(value);
            if (!seeds)
                bad("'seeds' needs A..B or a comma list of non-negative integers");
            else
                sc.seeds = *seeds;
        } else if (key == "checks") {
            for (const auto& item : split_list(value)) {
                if (item != "brb" && item != "irc" && item != "muteness" &&
                    item != "consistency" && item != "differential" && item != "fifo")
                    bad("unknown checker '" + item + "'");
                else
                    sc.checks.insert(item);
            }
        } else if (key == "mutation.deliver_quorum_delta") {
            want_int(sc.params.mutations.deliver_quorum_delta, -8, 8);
        } else if (key == "mutation.echo_quorum_delta") {
            want_int(sc.params.mutations.echo_quorum_delta, -8, 8);
        } else if (key == "mutation.skip_label_reset") {
            want_bool(sc.params.mutations.skip_label_reset);
        } else {
            bad("unknown key '" + key + "'");
        }
    }

    sc.transient.enabled = transient_mentioned;

    for (const auto& v : sc.params.validate()) res.errors.push_back({0, v});
    if (static_cast<int>(sc.adversary.nodes.size()) > sc.params.t)
        res.errors.push_back({0, "more adversary nodes than the fault bound t"});
    for (const auto& [id, strat] : sc.adversary.nodes) {
        (void)strat;
        if (id < 0 || id >= sc.params.n)
            res.errors.push_back({0, "adversary node " + std::to_string(id) + " out of range"});
    }
    if (sc.fifo && sc.mode != Mode::Integrated)
        res.errors.push_back({0, "fifo delivery requires integrated mode"});
    if (sc.mode == Mode::SingleBrbAsync && sc.transient.enabled)
        res.errors.push_back({0, "transient injection needs a recycling mode to recover in"});

    if (res.errors.empty()) res.scenario = std::move(sc);
    return res;
}

}  // namespace ssbrb
