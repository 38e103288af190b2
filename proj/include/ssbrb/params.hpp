#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssbrb {

/// Node identifier, an index in [0, n).
using NodeId = int;

/// Application payload carried by a broadcast. Opaque bytes, compared
/// lexicographically wherever a deterministic tie-break is needed.
using Value = std::string;

/// Hard cap on payload length. Messages carrying longer values are
/// rejected whole at merge time.
inline constexpr std::size_t kMaxValueBytes = 64;

/// Sentinel for "no round yet" in the recycling counters.
inline constexpr int kNoRound = -1;

/// Fault-injection switches used by the checker-sensitivity tests.
/// All default to off; the verification layer never reads these, so a
/// mutated protocol run is still judged against the real thresholds.
struct Mutations {
    int deliver_quorum_delta = 0;   // added to the 2t+1 delivery threshold
    int echo_quorum_delta = 0;      // added to the (n+t)/2 echo quorum
    bool skip_label_reset = false;  // keep round-trip labels across increments

    bool any() const {
        return deliver_quorum_delta != 0 || echo_quorum_delta != 0 || skip_label_reset;
    }
};

/// System-wide constants shared by every node.
///
/// Required relationships:
///  - resilience: 3t + 1 <= n
///  - counter windows: capacity < lambda and 6 * lambda < modulus (strict)
///  - muteness threshold theta >= 1, concurrency degree delta >= 1
///
/// `modulus` is the wraparound bound for round counters; round-trip
/// labels and muteness counters saturate at the same bound.
struct Params {
    int n = 4;         // nodes
    int t = 1;         // tolerated Byzantine nodes
    int capacity = 2;  // per-channel message capacity
    int lambda = 3;    // staleness window for round counters
    int modulus = 32;  // round counter wraparound (B)
    int theta = 12;    // muteness suspicion threshold
    int delta = 2;     // concurrent broadcast instances per node

    Mutations mutations;

    /// Returns one human-readable line per violated constraint; valid
    /// iff the result is empty.
    std::vector<std::string> validate() const {
        std::vector<std::string> v;
        if (n <= 0) v.push_back("n must be positive");
        if (t < 0) v.push_back("t must be non-negative");
        if (capacity <= 0) v.push_back("capacity must be positive");
        if (lambda <= 0) v.push_back("lambda must be positive");
        if (modulus <= 0) v.push_back("modulus must be positive");
        if (n > 0 && t >= 0 && 3 * t + 1 > n) v.push_back("resilience requires 3t+1 <= n");
        if (capacity > 0 && lambda > 0 && capacity >= lambda)
            v.push_back("capacity must be strictly below lambda");
        if (lambda > 0 && modulus > 0 && 6 * lambda >= modulus)
            v.push_back("lambda must be strictly below modulus/6");
        if (theta < 1) v.push_back("theta must be at least 1");
        if (delta < 1) v.push_back("delta must be at least 1");
        return v;
    }

    bool valid() const { return validate().empty(); }

    /// Echo quorum: a value needs strictly more than (n+t)/2 supporting
    /// entries before it may be readied or treated as justified.
    /// rule: echo-quorum
    bool echo_quorum_met(int count) const {
        return 2 * (count - mutations.echo_quorum_delta) > n + t;
    }

    /// Same bound evaluated by the checkers, immune to mutations.
    bool echo_quorum_met_strict(int count) const { return 2 * count > n + t; }

    /// Ready relay threshold: t+1 matching ready entries.
    int ready_relay_threshold() const { return t + 1; }

    /// Delivery threshold: 2t+1 matching ready entries.
    /// rule: deliver-quorum
    int deliver_threshold() const { return 2 * t + 1 + mutations.deliver_quorum_delta; }

    int deliver_threshold_strict() const { return 2 * t + 1; }

    /// Round-trip labels must exceed this before a node may start a new
    /// round: twice the channel capacity plus one round trip of slack.
    int label_threshold() const { return 2 * (capacity + 1); }
};

}  // namespace ssbrb
