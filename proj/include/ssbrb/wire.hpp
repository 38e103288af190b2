#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssbrb/brb.hpp"
#include "ssbrb/irc.hpp"
#include "ssbrb/params.hpp"

namespace ssbrb {

/// The one message type of the protocol: which concurrent instance it
/// belongs to, the sender's broadcast record, the piggybacked
/// recycling-counter fields, and the sender's per-slot round view.
///
/// `views[k]` is the round the sender currently associates with slot k
/// of this instance. Receivers only merge slot-k content from a message
/// whose view of k matches their own; see rule: view-fence. An empty
/// vector means "no view stated" and is treated as all-sentinel.
struct WireMessage {
    int instance = 0;
    BrbEntry brb;
    IrcWire irc;
    std::vector<int> views;

    bool operator==(const WireMessage&) const = default;
};

namespace wire {

// Canonical encoding: length-prefixed, little-endian fixed-width
// integers, set elements in their (already sorted) container order.
// Two equal messages always encode to identical bytes, which is what
// trace hashing and replay rely on.

inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_i32(std::string& out, std::int32_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
}

inline void put_value(std::string& out, const Value& v) {
    put_u32(out, static_cast<std::uint32_t>(v.size()));
    out.append(v);
}

inline std::string encode(const WireMessage& m) {
    std::string out;
    put_i32(out, m.instance);
    put_u32(out, static_cast<std::uint32_t>(m.brb.init.size()));
    for (const auto& v : m.brb.init) put_value(out, v);
    put_u32(out, static_cast<std::uint32_t>(m.brb.echo.size()));
    for (const auto& [k, v] : m.brb.echo) {
        put_i32(out, k);
        put_value(out, v);
    }
    put_u32(out, static_cast<std::uint32_t>(m.brb.ready.size()));
    for (const auto& [k, v] : m.brb.ready) {
        put_i32(out, k);
        put_value(out, v);
    }
    out.push_back(m.irc.ack ? '\1' : '\0');
    put_i32(out, m.irc.seq);
    put_i32(out, m.irc.lbl);
    put_u32(out, static_cast<std::uint32_t>(m.views.size()));
    for (int r : m.views) put_i32(out, r);
    return out;
}

/// Absolute cap on decoded set sizes, defending against garbage
/// length prefixes. The per-parameters cap (3n) is enforced at merge.
inline constexpr std::uint32_t kMaxSetEntries = 4096;

class Reader {
public:
    explicit Reader(const std::string& buf) : buf_(buf) {}

    bool u32(std::uint32_t& out) {
        if (pos_ + 4 > buf_.size()) return false;
        out = static_cast<std::uint8_t>(buf_[pos_]) |
              (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + 1])) << 8) |
              (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + 2])) << 16) |
              (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + 3])) << 24);
        pos_ += 4;
        return true;
    }

    bool i32(std::int32_t& out) {
        std::uint32_t u;
        if (!u32(u)) return false;
        out = static_cast<std::int32_t>(u);
        return true;
    }

    bool byte(std::uint8_t& out) {
        if (pos_ >= buf_.size()) return false;
        out = static_cast<std::uint8_t>(buf_[pos_++]);
        return true;
    }

    bool value(Value& out) {
        std::uint32_t len;
        if (!u32(len)) return false;
        if (len > kMaxValueBytes || pos_ + len > buf_.size()) return false;
        out.assign(buf_, pos_, len);
        pos_ += len;
        return true;
    }

    bool done() const { return pos_ == buf_.size(); }

private:
    const std::string& buf_;
    std::size_t pos_ = 0;
};

inline std::optional<WireMessage> decode(const std::string& bytes) {
    Reader r(bytes);
    WireMessage m;
    std::int32_t inst;
    if (!r.i32(inst)) return std::nullopt;
    m.instance = inst;

    std::uint32_t count;
    if (!r.u32(count) || count > kMaxSetEntries) return std::nullopt;
    for (std::uint32_t i = 0; i < count; ++i) {
        Value v;
        if (!r.value(v)) return std::nullopt;
        m.brb.init.insert(std::move(v));
    }
    for (auto* set : {&m.brb.echo, &m.brb.ready}) {
        if (!r.u32(count) || count > kMaxSetEntries) return std::nullopt;
        for (std::uint32_t i = 0; i < count; ++i) {
            std::int32_t node;
            Value v;
            if (!r.i32(node) || !r.value(v)) return std::nullopt;
            set->insert({node, std::move(v)});
        }
    }
    std::uint8_t ack;
    if (!r.byte(ack) || ack > 1) return std::nullopt;
    m.irc.ack = ack == 1;
    if (!r.i32(m.irc.seq) || !r.i32(m.irc.lbl)) return std::nullopt;
    if (!r.u32(count) || count > kMaxSetEntries) return std::nullopt;
    m.views.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!r.i32(m.views[i])) return std::nullopt;
    }
    if (!r.done()) return std::nullopt;
    return m;
}

inline std::string to_hex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

inline std::optional<std::string> from_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = nib(hex[i]), lo = nib(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<char>((hi << 4) | lo));
    }
    return out;
}

}  // namespace wire
}  // namespace ssbrb
