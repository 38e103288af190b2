#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ssbrb {

/// One trace record. Serialized as `step|node|event|key=value,...`
/// with `-` as the node of world-level events. Free-form bytes (the
/// application values) appear hex-encoded so the line structure stays
/// unambiguous.
struct TraceEvent {
    long step = 0;
    int node = -1;
    std::string kind;
    std::vector<std::pair<std::string, std::string>> kv;

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : kv)
            if (k == key) return &v;
        return nullptr;
    }

    long num(const std::string& key, long fallback = 0) const {
        const std::string* v = find(key);
        if (!v) return fallback;
        try {
            return std::stol(*v);
        } catch (...) {
            return fallback;
        }
    }

    bool operator==(const TraceEvent&) const = default;
};

struct Trace {
    std::vector<TraceEvent> events;

    void emit(long step, int node, std::string kind,
              std::vector<std::pair<std::string, std::string>> kv = {}) {
        events.push_back({step, node, std::move(kind), std::move(kv)});
    }

    std::string serialize() const {
        std::string out;
        for (const auto& e : events) {
            out += std::to_string(e.step);
            out += '|';
            if (e.node < 0)
                out += '-';
            else
                out += std::to_string(e.node);
            out += '|';
            out += e.kind;
            out += '|';
            bool first = true;
            for (const auto& [k, v] : e.kv) {
                if (!first) out += ',';
                first = false;
                out += k;
                out += '=';
                out += v;
            }
            out += '\n';
        }
        return out;
    }

    static std::optional<Trace> parse(const std::string& text) {
        Trace t;
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t eol = text.find('\n', pos);
            if (eol == std::string::npos) eol = text.size();
            const std::string line = text.substr(pos, eol - pos);
            pos = eol + 1;
            if (line.empty()) continue;

            const std::size_t b1 = line.find('|');
            if (b1 == std::string::npos) return std::nullopt;
            const std::size_t b2 = line.find('|', b1 + 1);
            if (b2 == std::string::npos) return std::nullopt;
            const std::size_t b3 = line.find('|', b2 + 1);
            if (b3 == std::string::npos) return std::nullopt;

            TraceEvent e;
            try {
                e.step = std::stol(line.substr(0, b1));
                const std::string node = line.substr(b1 + 1, b2 - b1 - 1);
                e.node = node == "-" ? -1 : std::stoi(node);
            } catch (...) {
                return std::nullopt;
            }
            e.kind = line.substr(b2 + 1, b3 - b2 - 1);
            if (e.kind.empty()) return std::nullopt;

            std::size_t p = b3 + 1;
            while (p < line.size()) {
                std::size_t comma = line.find(',', p);
                if (comma == std::string::npos) comma = line.size();
                const std::size_t eq = line.find('=', p);
                if (eq == std::string::npos || eq > comma) return std::nullopt;
                e.kv.emplace_back(line.substr(p, eq - p), line.substr(eq + 1, comma - eq - 1));
                p = comma + 1;
            }
            t.events.push_back(std::move(e));
        }
        return t;
    }

    std::uint64_t hash() const { return fnv1a(serialize()); }

    static std::uint64_t fnv1a(const std::string& bytes) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

}  // namespace ssbrb
