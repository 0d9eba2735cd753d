#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "feakm/geometry.hpp"
#include "feakm/keypoint.hpp"

namespace feakm {

// What actually travels between agents each frame: pose, keypoints,
// descriptors. Fixed little-endian layout, normative and bit-exact:
//   magic "FKM1" | version u8 | agent_id u32 | pose 6 x f64 | N u32 | D u16 |
//   coords N x 2 f32 | scores N x f32 | descriptors N x D f32
struct CollabMessage {
    std::uint8_t version = 1;
    std::uint32_t agent_id = 0;
    Pose pose;
    std::vector<Eigen::Vector2f> coords;  // cells, sender's grid
    std::vector<float> scores;
    Eigen::MatrixXf descriptors;  // N x D, unit rows

    std::uint32_t keypoint_count() const { return static_cast<std::uint32_t>(coords.size()); }
    std::uint16_t descriptor_dim() const { return static_cast<std::uint16_t>(descriptors.cols()); }
};

inline constexpr std::size_t kMessageHeaderBytes = 4 + 1 + 4 + 48 + 4 + 2;  // = 63

// Closed-form message size; bandwidth accounting is exact without
// re-encoding.
inline std::uint64_t encoded_length(std::uint64_t n, std::uint64_t d) {
    return kMessageHeaderBytes + n * (8 + 4 + 4 * d);
}

class DecodeError : public std::runtime_error {
public:
    enum class Kind { BadMagic, UnsupportedVersion, Truncated, TrailingData, SizeOverflow, InvalidPayload };

    DecodeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

namespace detail {

template <typename T>
void store_le(std::vector<std::uint8_t>& out, T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    // x86 and every target this builds on is little-endian; memcpy keeps the
    // layout, the static_assert keeps us honest.
    static_assert(std::endian::native == std::endian::little);
    out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T load_le(const std::uint8_t* p) {
    static_assert(std::endian::native == std::endian::little);
    T value;
    std::memcpy(&value, p, sizeof(T));
    return value;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_message(const CollabMessage& m) {
    const std::size_t n = m.coords.size();
    if (m.scores.size() != n || static_cast<std::size_t>(m.descriptors.rows()) != n) {
        throw std::invalid_argument("encode_message: keypoint field sizes disagree");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (m.scores[i] < 0.0f || m.scores[i] > 1.0f || !std::isfinite(m.scores[i])) {
            throw std::invalid_argument("encode_message: score out of [0, 1]");
        }
        const float norm = m.descriptors.row(static_cast<Eigen::Index>(i)).norm();
        if (std::abs(norm - 1.0f) > 1e-3f) {
            throw std::invalid_argument("encode_message: descriptor row is not unit norm");
        }
    }

    std::vector<std::uint8_t> out;
    out.reserve(encoded_length(n, static_cast<std::uint64_t>(m.descriptors.cols())));
    out.insert(out.end(), {'F', 'K', 'M', '1'});
    detail::store_le(out, m.version);
    detail::store_le(out, m.agent_id);
    for (double v : {m.pose.x, m.pose.y, m.pose.z, m.pose.yaw, m.pose.pitch, m.pose.roll}) {
        detail::store_le(out, v);
    }
    detail::store_le(out, static_cast<std::uint32_t>(n));
    detail::store_le(out, static_cast<std::uint16_t>(m.descriptors.cols()));
    for (const Eigen::Vector2f& c : m.coords) {
        detail::store_le(out, c.x());
        detail::store_le(out, c.y());
    }
    for (float s : m.scores) detail::store_le(out, s);
    for (Eigen::Index r = 0; r < m.descriptors.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.descriptors.cols(); ++c) {
            detail::store_le(out, m.descriptors(r, c));
        }
    }
    return out;
}

inline CollabMessage decode_message(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "FKM1", 4) != 0) {
        throw DecodeError(DecodeError::Kind::BadMagic, "decode_message: bad magic");
    }
    if (bytes.size() < kMessageHeaderBytes) {
        throw DecodeError(DecodeError::Kind::Truncated, "decode_message: header truncated");
    }
    const std::uint8_t version = bytes[4];
    if (version != 1) {
        throw DecodeError(DecodeError::Kind::UnsupportedVersion,
                          "decode_message: unsupported version " + std::to_string(version));
    }
    const std::uint32_t n = detail::load_le<std::uint32_t>(bytes.data() + 57);
    const std::uint16_t d = detail::load_le<std::uint16_t>(bytes.data() + 61);

    // Guard N * (12 + 4 D) before trusting it as a length. The u64 product of
    // a u32 count and a u16 dim cannot wrap, so the overflow class is a hard
    // sanity cap on the declared payload.
    const std::uint64_t expected = encoded_length(n, d);
    if (expected > (1ull << 32)) {
        throw DecodeError(DecodeError::Kind::SizeOverflow,
                          "decode_message: declared payload of " + std::to_string(expected) +
                              " bytes exceeds the 4 GiB cap");
    }
    if (bytes.size() < expected) {
        throw DecodeError(DecodeError::Kind::Truncated,
                          "decode_message: payload truncated (expected " + std::to_string(expected) +
                              " bytes, got " + std::to_string(bytes.size()) + ")");
    }
    if (bytes.size() > expected) {
        throw DecodeError(DecodeError::Kind::TrailingData, "decode_message: trailing bytes");
    }

    CollabMessage m;
    m.version = version;
    m.agent_id = detail::load_le<std::uint32_t>(bytes.data() + 5);
    const double px = detail::load_le<double>(bytes.data() + 9);
    const double py = detail::load_le<double>(bytes.data() + 17);
    const double pz = detail::load_le<double>(bytes.data() + 25);
    const double yaw = detail::load_le<double>(bytes.data() + 33);
    const double pitch = detail::load_le<double>(bytes.data() + 41);
    const double roll = detail::load_le<double>(bytes.data() + 49);
    m.pose = Pose(px, py, pz, yaw, pitch, roll);

    const std::uint8_t* p = bytes.data() + kMessageHeaderBytes;
    m.coords.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const float x = detail::load_le<float>(p);
        const float y = detail::load_le<float>(p + 4);
        m.coords[i] = {x, y};
        p += 8;
    }
    m.scores.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        m.scores[i] = detail::load_le<float>(p);
        p += 4;
    }
    m.descriptors.resize(n, d);
    for (std::uint32_t r = 0; r < n; ++r) {
        for (std::uint16_t c = 0; c < d; ++c) {
            m.descriptors(r, c) = detail::load_le<float>(p);
            p += 4;
        }
    }

    for (std::uint32_t i = 0; i < n; ++i) {
        if (!std::isfinite(m.scores[i]) || m.scores[i] < 0.0f || m.scores[i] > 1.0f) {
            throw DecodeError(DecodeError::Kind::InvalidPayload,
                              "decode_message: score out of [0, 1]");
        }
        if (!m.coords[i].allFinite()) {
            throw DecodeError(DecodeError::Kind::InvalidPayload, "decode_message: non-finite coord");
        }
        const float norm = m.descriptors.row(static_cast<Eigen::Index>(i)).norm();
        if (!std::isfinite(norm) || std::abs(norm - 1.0f) > 1e-3f) {
            throw DecodeError(DecodeError::Kind::InvalidPayload,
                              "decode_message: descriptor row not unit norm");
        }
    }
    return m;
}

inline CollabMessage make_message(std::uint32_t agent_id, const Pose& pose, const KeypointSet& kp) {
    CollabMessage m;
    m.agent_id = agent_id;
    m.pose = pose;
    m.descriptors = kp.descriptors;
    m.coords.reserve(kp.coords.size());
    for (const Eigen::Vector2d& c : kp.coords) m.coords.push_back(c.cast<float>());
    m.scores.reserve(kp.scores.size());
    for (double s : kp.scores) m.scores.push_back(static_cast<float>(s));
    return m;
}

inline KeypointSet keypoints_from_message(const CollabMessage& m) {
    KeypointSet kp;
    kp.descriptors = m.descriptors;
    for (const Eigen::Vector2f& c : m.coords) kp.coords.push_back(c.cast<double>());
    for (float s : m.scores) kp.scores.push_back(s);
    return kp;
}

struct BandwidthReport {
    std::map<std::uint32_t, std::uint64_t> bytes_per_agent;
    std::uint64_t total_bytes = 0;
};

inline BandwidthReport bandwidth_report(const std::vector<CollabMessage>& messages) {
    BandwidthReport report;
    for (const CollabMessage& m : messages) {
        const std::uint64_t len = encoded_length(m.keypoint_count(), m.descriptor_dim());
        report.bytes_per_agent[m.agent_id] += len;
        report.total_bytes += len;
    }
    return report;
}

}  // namespace feakm
