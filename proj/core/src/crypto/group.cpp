#include "copra/crypto/group.hpp"

#include <gmpxx.h>
#include <sodium.h>

#include <array>
#include <mutex>

namespace copra::crypto {

namespace {

void ensure_sodium() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (sodium_init() < 0) throw CryptoError("libsodium initialization failed");
    });
}

Bytes blake2b(BytesView in, std::size_t out_len) {
    Bytes out(out_len);
    crypto_generichash(out.data(), out.size(), in.data(), in.size(), nullptr, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Ristretto255 backend (libsodium).
// ---------------------------------------------------------------------------

class Ristretto255Group final : public Group {
public:
    Ristretto255Group() { ensure_sodium(); }

    GroupId id() const override { return GroupId::Ristretto255; }
    std::size_t element_size() const override { return crypto_core_ristretto255_BYTES; }
    std::size_t scalar_size() const override { return crypto_core_ristretto255_SCALARBYTES; }

    Bytes hash_to_group(BytesView item) const override {
        // SHA-512(dst || ctr || item) -> from_hash; ctr only advances in the
        // astronomically unlikely identity case.
        for (std::uint8_t ctr = 0;; ++ctr) {
            Bytes msg;
            put_bytes(msg, to_bytes("copra/hash-to-group/ristretto255"));
            put_u8(msg, ctr);
            put_bytes(msg, item);
            std::array<std::uint8_t, crypto_hash_sha512_BYTES> digest;
            crypto_hash_sha512(digest.data(), msg.data(), msg.size());
            Bytes element(crypto_core_ristretto255_BYTES);
            crypto_core_ristretto255_from_hash(element.data(), digest.data());
            static const Bytes identity(crypto_core_ristretto255_BYTES, 0);
            if (element != identity) return element;
        }
    }

    Bytes random_scalar() const override {
        Bytes s(crypto_core_ristretto255_SCALARBYTES);
        do {
            crypto_core_ristretto255_scalar_random(s.data());
        } while (sodium_is_zero(s.data(), s.size()));
        return s;
    }

    Bytes invert_scalar(BytesView scalar) const override {
        if (scalar.size() != scalar_size()) throw CryptoError("bad scalar width");
        Bytes inv(crypto_core_ristretto255_SCALARBYTES);
        if (crypto_core_ristretto255_scalar_invert(inv.data(), scalar.data()) != 0)
            throw CryptoError("scalar not invertible");
        return inv;
    }

    Bytes exponentiate(BytesView element, BytesView scalar) const override {
        if (scalar.size() != scalar_size()) throw CryptoError("bad scalar width");
        if (!is_valid_element(element))
            throw ElementDecodeError("non-canonical ristretto255 element");
        Bytes out(crypto_core_ristretto255_BYTES);
        if (crypto_scalarmult_ristretto255(out.data(), scalar.data(), element.data()) != 0)
            throw CryptoError("scalar multiplication produced identity");
        return out;
    }

    bool is_valid_element(BytesView element) const override {
        return element.size() == crypto_core_ristretto255_BYTES &&
               crypto_core_ristretto255_is_valid_point(element.data()) == 1;
    }
};

// ---------------------------------------------------------------------------
// 2048-bit Schnorr subgroup backend (GMP). Elements live in the quadratic
// residue subgroup of the RFC 3526 group-14 safe prime, order q = (p-1)/2.
// ---------------------------------------------------------------------------

constexpr char kModp2048Hex[] =
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

constexpr std::size_t kSchnorrElementBytes = 256;
constexpr std::size_t kSchnorrScalarBytes = 256;

Bytes mpz_to_fixed(const mpz_class& v, std::size_t width) {
    Bytes out(width, 0);
    std::size_t n = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
    if (n > width) throw CryptoError("value exceeds encoding width");
    std::size_t count = 0;
    mpz_export(out.data() + width - n, &count, 1, 1, 1, 0, v.get_mpz_t());
    return out;
}

mpz_class mpz_from_bytes(BytesView data) {
    mpz_class v;
    mpz_import(v.get_mpz_t(), data.size(), 1, 1, 1, 0, data.data());
    return v;
}

class Schnorr2048Group final : public Group {
public:
    Schnorr2048Group() : p_(kModp2048Hex, 16) {
        ensure_sodium();
        q_ = (p_ - 1) / 2;
    }

    GroupId id() const override { return GroupId::Schnorr2048; }
    std::size_t element_size() const override { return kSchnorrElementBytes; }
    std::size_t scalar_size() const override { return kSchnorrScalarBytes; }

    Bytes hash_to_group(BytesView item) const override {
        // Try-and-increment: expand to 2048 bits, accept the first candidate
        // in [2, p-1] that is a quadratic residue.
        for (std::uint32_t ctr = 0;; ++ctr) {
            mpz_class c = expand_candidate(item, ctr) % p_;
            if (c <= 1) continue;
            if (mpz_legendre(c.get_mpz_t(), p_.get_mpz_t()) == 1)
                return mpz_to_fixed(c, kSchnorrElementBytes);
        }
    }

    Bytes random_scalar() const override {
        // Rejection-free: 512 random bytes reduced mod (q-1), then +1.
        Bytes raw(64);
        randombytes_buf(raw.data(), raw.size());
        mpz_class s = mpz_from_bytes(raw) % (q_ - 1) + 1;
        return mpz_to_fixed(s, kSchnorrScalarBytes);
    }

    Bytes invert_scalar(BytesView scalar) const override {
        mpz_class s = mpz_from_bytes(scalar);
        mpz_class inv;
        if (mpz_invert(inv.get_mpz_t(), s.get_mpz_t(), q_.get_mpz_t()) == 0)
            throw CryptoError("scalar not invertible");
        return mpz_to_fixed(inv, kSchnorrScalarBytes);
    }

    Bytes exponentiate(BytesView element, BytesView scalar) const override {
        mpz_class base = decode(element);
        mpz_class s = mpz_from_bytes(scalar);
        mpz_class out;
        mpz_powm(out.get_mpz_t(), base.get_mpz_t(), s.get_mpz_t(), p_.get_mpz_t());
        return mpz_to_fixed(out, kSchnorrElementBytes);
    }

    bool is_valid_element(BytesView element) const override {
        if (element.size() != kSchnorrElementBytes) return false;
        mpz_class v = mpz_from_bytes(element);
        if (v < 1 || v >= p_) return false;
        return v == 1 || mpz_legendre(v.get_mpz_t(), p_.get_mpz_t()) == 1;
    }

private:
    mpz_class decode(BytesView element) const {
        if (!is_valid_element(element))
            throw ElementDecodeError("non-canonical Schnorr subgroup element");
        return mpz_from_bytes(element);
    }

    static mpz_class expand_candidate(BytesView item, std::uint32_t ctr) {
        // Counter-mode BLAKE2b expansion to 256 bytes.
        Bytes material;
        for (std::uint8_t block = 0; block < 4; ++block) {
            Bytes msg;
            put_bytes(msg, to_bytes("copra/hash-to-group/schnorr2048"));
            put_u32(msg, ctr);
            put_u8(msg, block);
            put_bytes(msg, item);
            put_bytes(material, blake2b(msg, 64));
        }
        return mpz_from_bytes(material);
    }

    mpz_class p_;
    mpz_class q_;
};

}  // namespace

std::string_view group_name(GroupId id) {
    switch (id) {
        case GroupId::Ristretto255: return "ristretto255";
        case GroupId::Schnorr2048: return "schnorr2048";
    }
    return "unknown";
}

std::shared_ptr<const Group> make_group(GroupId id) {
    switch (id) {
        case GroupId::Ristretto255: return std::make_shared<Ristretto255Group>();
        case GroupId::Schnorr2048: return std::make_shared<Schnorr2048Group>();
    }
    throw CryptoError("unknown group id");
}

Bytes tag_hash(BytesView element, std::string_view domain, std::size_t out_len) {
    ensure_sodium();
    Bytes msg;
    put_u16(msg, static_cast<std::uint16_t>(domain.size()));
    put_bytes(msg, to_bytes(domain));
    put_bytes(msg, element);
    return blake2b(msg, out_len);
}

}  // namespace copra::crypto
