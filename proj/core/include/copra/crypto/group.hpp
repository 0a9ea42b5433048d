#pragma once

#include <memory>
#include <stdexcept>
#include <string_view>

#include "copra/bytes.hpp"

namespace copra::crypto {

enum class GroupId : std::uint8_t {
    Ristretto255 = 1,  // default profile: prime-order EC group, 32-byte encodings
    Schnorr2048  = 2,  // fallback profile: 2048-bit safe-prime subgroup, 256-byte encodings
};

std::string_view group_name(GroupId id);

class CryptoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown when a received byte string is not a canonical group element.
class ElementDecodeError : public CryptoError {
public:
    using CryptoError::CryptoError;
};

// Prime-order group with fixed-width canonical element encodings. Elements and
// scalars travel as opaque byte vectors so the two backends share one protocol
// implementation. All methods are const and instances are safe to share across
// concurrent sessions.
class Group {
public:
    virtual ~Group() = default;

    virtual GroupId id() const = 0;
    virtual std::size_t element_size() const = 0;
    virtual std::size_t scalar_size() const = 0;

    // Deterministic map item -> group element (random-oracle style).
    virtual Bytes hash_to_group(BytesView item) const = 0;

    // Uniform scalar in [1, q-1] from the OS entropy source.
    virtual Bytes random_scalar() const = 0;

    virtual Bytes invert_scalar(BytesView scalar) const = 0;

    // element^scalar; throws ElementDecodeError on non-canonical input.
    virtual Bytes exponentiate(BytesView element, BytesView scalar) const = 0;

    virtual bool is_valid_element(BytesView element) const = 0;
};

std::shared_ptr<const Group> make_group(GroupId id);

struct CryptoParams {
    GroupId group_id = GroupId::Ristretto255;
    int kappa_bits = 128;  // item-tag width

    std::size_t tag_size() const { return static_cast<std::size_t>(kappa_bits) / 8; }
    bool operator==(const CryptoParams&) const = default;
};

// Domain-separated digest of a group element, kappa bits wide for item tags and
// wider when used for key derivation.
Bytes tag_hash(BytesView element, std::string_view domain, std::size_t out_len);

}  // namespace copra::crypto
