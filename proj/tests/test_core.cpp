#include "cpmiss/core.hpp"
#include "cpmiss/error.hpp"

#include <doctest.h>

#include <random>

using namespace cpmiss;

namespace {

std::vector<Mask> all_masks(std::size_t d) {
    std::vector<Mask> out;
    for (std::size_t code = 0; code < (std::size_t{1} << d); ++code) {
        Mask m(d);
        for (std::size_t j = 0; j < d; ++j) m.set_missing(j, (code >> (d - 1 - j)) & 1U);
        out.push_back(m);
    }
    return out;
}

} // namespace

TEST_SUITE("core") {

TEST_CASE("mask parsing and printing") {
    const Mask m = Mask::parse("[110]");
    CHECK(m.size() == 3);
    CHECK(m.missing(0));
    CHECK(m.missing(1));
    CHECK(m.observed(2));
    CHECK(m.str() == "110");
    CHECK(Mask::parse("110") == m);
    CHECK(m.count() == 2);
    CHECK(m.observed_indices() == std::vector<std::size_t>{2});
    CHECK(m.missing_indices() == std::vector<std::size_t>{0, 1});
    CHECK_THROWS(Mask::parse("1x0"));
}

TEST_CASE("mask order is a partial order") {
    const auto masks = all_masks(4);
    for (const auto& a : masks) {
        CHECK(mask_precedes(a, a));
        CHECK(mask_precedes(Mask(4), a));
        CHECK(mask_precedes(a, Mask(4, true)));
        for (const auto& b : masks) {
            if (mask_precedes(a, b) && mask_precedes(b, a)) CHECK(a == b);
            for (const auto& c : masks) {
                if (mask_precedes(a, b) && mask_precedes(b, c)) CHECK(mask_precedes(a, c));
            }
        }
    }
    CHECK(mask_precedes(Mask::parse("100"), Mask::parse("110")));
    CHECK_FALSE(mask_precedes(Mask::parse("110"), Mask::parse("100")));
    CHECK_FALSE(mask_precedes(Mask::parse("100"), Mask::parse("010")));
    CHECK_THROWS_AS(mask_precedes(Mask(2), Mask(3)), DimensionError);
}

TEST_CASE("masked sample consistency") {
    MaskedSample s({1.0, std::nullopt, 3.0}, 4.0);
    CHECK(s.mask().str() == "010");
    CHECK(s.value(0) == 1.0);
    CHECK_THROWS(s.value(1));
    CHECK_THROWS_AS(MaskedSample({1.0, 2.0}, Mask::parse("10"), 0.0), DataError);
    const double full[] = {1.0, 2.0, 3.0};
    const auto t = MaskedSample::from_complete(full, Mask::parse("101"));
    CHECK_FALSE(t.x()[0].has_value());
    CHECK(t.x()[1] == 2.0);
    CHECK_FALSE(t.y().has_value());
}

TEST_CASE("available cases are exactly the preceding masks") {
    std::mt19937_64 rng(3);
    const auto masks = all_masks(3);
    MaskedDataset ds(3);
    std::vector<Mask> drawn;
    for (int i = 0; i < 60; ++i) {
        const Mask m = masks[rng() % masks.size()];
        const double full[] = {1.0 * i, 2.0, 3.0};
        ds.push_back(MaskedSample::from_complete(full, m, 0.0));
        drawn.push_back(m);
    }
    for (const auto& target : masks) {
        std::vector<std::size_t> expected;
        for (std::size_t i = 0; i < drawn.size(); ++i) {
            bool ok = true;
            for (std::size_t j = 0; j < 3; ++j) ok = ok && (!drawn[i].missing(j) || target.missing(j));
            if (ok) expected.push_back(i);
        }
        CHECK(available_cases(ds, target) == expected);
    }
}

TEST_CASE("remask hides extra entries and rejects incompatible targets") {
    MaskedSample s({1.0, 2.0, std::nullopt}, 5.0);
    const auto r = remask(s, Mask::parse("101"));
    CHECK(r.mask().str() == "101");
    CHECK(r.x()[1] == 2.0);
    CHECK(r.y() == 5.0);
    CHECK_THROWS_AS(remask(s, Mask::parse("100")), MaskOrderError);
}

TEST_CASE("column ranges ignore missing entries") {
    MaskedDataset ds(2);
    ds.push_back(MaskedSample({1.0, std::nullopt}));
    ds.push_back(MaskedSample({4.0, std::nullopt}));
    ds.push_back(MaskedSample({-2.0, std::nullopt}));
    const auto r = ds.ranges();
    CHECK(r[0] == doctest::Approx(6.0));
    CHECK(r[1] == 1.0);
    MaskedDataset constant(1);
    constant.push_back(MaskedSample({2.0}));
    constant.push_back(MaskedSample({2.0}));
    CHECK(constant.ranges()[0] == 1.0);
    const std::size_t idx[] = {2, 0};
    const auto sub = ds.subset(idx);
    CHECK(sub.size() == 2);
    CHECK(sub[0].x()[0] == -2.0);
}

}
