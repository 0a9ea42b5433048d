#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "copra/crypto/group.hpp"

using namespace copra;
using namespace copra::crypto;

namespace {

Bytes bytes_of(std::string_view s) { return to_bytes(s); }

void check_blinding_roundtrip(const Group& g) {
    for (int i = 0; i < 8; ++i) {
        Bytes x = bytes_of("item-" + std::to_string(i));
        Bytes h = g.hash_to_group(x);
        Bytes r_c = g.random_scalar();
        Bytes r_s = g.random_scalar();
        Bytes double_blinded = g.exponentiate(g.exponentiate(h, r_c), r_s);
        Bytes unblinded = g.exponentiate(double_blinded, g.invert_scalar(r_c));
        CHECK(unblinded == g.exponentiate(h, r_s));
    }
}

}  // namespace

TEST_CASE("hash_to_group is deterministic and injective-looking") {
    for (GroupId id : {GroupId::Ristretto255, GroupId::Schnorr2048}) {
        CAPTURE(group_name(id));
        auto g = make_group(id);
        CHECK(g->hash_to_group(bytes_of("1.2.3.4")) == g->hash_to_group(bytes_of("1.2.3.4")));
        CHECK(g->hash_to_group(bytes_of("1.2.3.4")) != g->hash_to_group(bytes_of("1.2.3.5")));
        CHECK(g->is_valid_element(g->hash_to_group(bytes_of("1.2.3.4"))));
        CHECK(g->hash_to_group(bytes_of("1.2.3.4")).size() == g->element_size());
    }
}

TEST_CASE("scalar order consistency: exponent arithmetic is mod q") {
    for (GroupId id : {GroupId::Ristretto255, GroupId::Schnorr2048}) {
        CAPTURE(group_name(id));
        auto g = make_group(id);
        Bytes e = g->hash_to_group(bytes_of("base"));
        Bytes s = g->random_scalar();
        // s * s^-1 = 1 mod q, so the round trip must land on the same element.
        CHECK(g->exponentiate(g->exponentiate(e, s), g->invert_scalar(s)) == e);
    }
}

TEST_CASE("exponentiation commutes (group law sanity)") {
    for (GroupId id : {GroupId::Ristretto255, GroupId::Schnorr2048}) {
        CAPTURE(group_name(id));
        auto g = make_group(id);
        Bytes e = g->hash_to_group(bytes_of("x"));
        Bytes a = g->random_scalar();
        Bytes b = g->random_scalar();
        CHECK(g->exponentiate(g->exponentiate(e, a), b) ==
              g->exponentiate(g->exponentiate(e, b), a));
    }
}

TEST_CASE("blinding correctness property") {
    check_blinding_roundtrip(*make_group(GroupId::Ristretto255));
    check_blinding_roundtrip(*make_group(GroupId::Schnorr2048));
}

TEST_CASE("non-canonical encodings are rejected") {
    auto r = make_group(GroupId::Ristretto255);
    Bytes s = r->random_scalar();

    Bytes garbage(r->element_size(), 0xFF);
    CHECK_FALSE(r->is_valid_element(garbage));
    CHECK_THROWS_AS(r->exponentiate(garbage, s), ElementDecodeError);

    Bytes wrong_width(r->element_size() - 1, 0x01);
    CHECK_FALSE(r->is_valid_element(wrong_width));

    auto g = make_group(GroupId::Schnorr2048);
    Bytes too_large(g->element_size(), 0xFF);  // >= p
    CHECK_FALSE(g->is_valid_element(too_large));
    CHECK_THROWS_AS(g->exponentiate(too_large, g->random_scalar()), ElementDecodeError);

    // Flip one byte of a valid element: with overwhelming probability the
    // result leaves the quadratic-residue subgroup or the curve image.
    Bytes valid = g->hash_to_group(bytes_of("probe"));
    int rejected = 0;
    for (int i = 0; i < 16; ++i) {
        Bytes mutated = valid;
        mutated[40 + i] ^= 0x5A;
        if (!g->is_valid_element(mutated)) rejected++;
    }
    CHECK(rejected > 0);
}

TEST_CASE("random scalars are nonzero and well-formed") {
    for (GroupId id : {GroupId::Ristretto255, GroupId::Schnorr2048}) {
        auto g = make_group(id);
        for (int i = 0; i < 16; ++i) {
            Bytes s = g->random_scalar();
            CHECK(s.size() == g->scalar_size());
            CHECK(s != Bytes(g->scalar_size(), 0));
        }
    }
}

TEST_CASE("tag_hash separates domains and honors width") {
    auto g = make_group(GroupId::Ristretto255);
    Bytes e = g->hash_to_group(bytes_of("elem"));
    Bytes ca = tag_hash(e, "ca-tag", 16);
    Bytes dt = tag_hash(e, "dt-tag", 16);
    Bytes key = tag_hash(e, "dt-key", 32);
    CHECK(ca.size() == 16);
    CHECK(key.size() == 32);
    CHECK(ca != dt);
    CHECK(tag_hash(e, "ca-tag", 16) == ca);
}
