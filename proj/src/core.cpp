#include "cpmiss/core.hpp"

#include "cpmiss/error.hpp"

#include <algorithm>
#include <cmath>

namespace cpmiss {

Mask::Mask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_) {
        if (b > 1) {
            throw DataError("mask entries must be 0 or 1");
        }
    }
}

Mask Mask::parse(std::string_view text) {
    if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
        text = text.substr(1, text.size() - 2);
    }
    std::vector<std::uint8_t> bits;
    bits.reserve(text.size());
    for (char c : text) {
        if (c == '0' || c == '1') {
            bits.push_back(static_cast<std::uint8_t>(c - '0'));
        } else {
            throw DataError("invalid mask string '" + std::string(text) + "'");
        }
    }
    return Mask(std::move(bits));
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> Mask::observed_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < bits_.size(); ++j) {
        if (bits_[j] == 0) out.push_back(j);
    }
    return out;
}

std::vector<std::size_t> Mask::missing_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < bits_.size(); ++j) {
        if (bits_[j] != 0) out.push_back(j);
    }
    return out;
}

std::string Mask::str() const {
    std::string s(bits_.size(), '0');
    for (std::size_t j = 0; j < bits_.size(); ++j) {
        if (bits_[j]) s[j] = '1';
    }
    return s;
}

bool mask_precedes(const Mask& lower, const Mask& upper) {
    if (lower.size() != upper.size()) {
        throw DimensionError("mask_precedes: masks of length " + std::to_string(lower.size()) + " and " +
                             std::to_string(upper.size()));
    }
    const auto& a = lower.bits();
    const auto& b = upper.bits();
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (a[j] > b[j]) return false;
    }
    return true;
}

namespace {

Mask mask_of(const std::vector<std::optional<double>>& x) {
    std::vector<std::uint8_t> bits(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        bits[j] = x[j].has_value() ? 0 : 1;
    }
    return Mask(std::move(bits));
}

} // namespace

MaskedSample::MaskedSample(std::vector<std::optional<double>> x, std::optional<double> y)
    : x_(std::move(x)), mask_(mask_of(x_)), y_(y) {}

MaskedSample::MaskedSample(std::vector<std::optional<double>> x, Mask mask, std::optional<double> y)
    : x_(std::move(x)), mask_(std::move(mask)), y_(y) {
    if (mask_.size() != x_.size()) {
        throw DimensionError("sample has " + std::to_string(x_.size()) + " covariates but mask of length " +
                             std::to_string(mask_.size()));
    }
    for (std::size_t j = 0; j < x_.size(); ++j) {
        if (x_[j].has_value() == mask_.missing(j)) {
            throw DataError("mask/value mismatch at covariate " + std::to_string(j));
        }
    }
}

MaskedSample MaskedSample::from_complete(std::span<const double> x, const Mask& mask, std::optional<double> y) {
    if (mask.size() != x.size()) {
        throw DimensionError("from_complete: dimension mismatch");
    }
    std::vector<std::optional<double>> values(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (mask.observed(j)) values[j] = x[j];
    }
    MaskedSample s;
    s.x_ = std::move(values);
    s.mask_ = mask;
    s.y_ = y;
    return s;
}

double MaskedSample::value(std::size_t j) const {
    const auto& v = x_.at(j);
    if (!v) {
        throw DataError("covariate " + std::to_string(j) + " is missing");
    }
    return *v;
}

double ColumnRange::range() const noexcept {
    if (!any_observed) return 1.0;
    const double r = max - min;
    return r > 0.0 ? r : 1.0;
}

MaskedDataset::MaskedDataset(std::size_t d, std::vector<MaskedSample> samples) : d_(d) {
    ranges_.resize(d_);
    samples_.reserve(samples.size());
    for (auto& s : samples) {
        push_back(std::move(s));
    }
}

void MaskedDataset::push_back(MaskedSample s) {
    if (s.dim() != d_) {
        throw DimensionError("dataset of dimension " + std::to_string(d_) + " cannot hold sample of dimension " +
                             std::to_string(s.dim()));
    }
    if (ranges_.size() != d_) ranges_.resize(d_);
    for (std::size_t j = 0; j < d_; ++j) {
        const auto& v = s.x()[j];
        if (!v) continue;
        auto& r = ranges_[j];
        if (!r.any_observed) {
            r.min = r.max = *v;
            r.any_observed = true;
        } else {
            r.min = std::min(r.min, *v);
            r.max = std::max(r.max, *v);
        }
    }
    samples_.push_back(std::move(s));
}

std::vector<double> MaskedDataset::ranges() const {
    std::vector<double> out(d_, 1.0);
    for (std::size_t j = 0; j < ranges_.size(); ++j) {
        out[j] = ranges_[j].range();
    }
    return out;
}

bool MaskedDataset::has_responses() const {
    return std::all_of(samples_.begin(), samples_.end(), [](const MaskedSample& s) { return s.y().has_value(); });
}

MaskedDataset MaskedDataset::subset(std::span<const std::size_t> indices) const {
    MaskedDataset out(d_);
    for (auto i : indices) {
        out.push_back(samples_.at(i));
    }
    return out;
}

std::vector<std::size_t> available_cases(const MaskedDataset& ds, const Mask& m) {
    if (m.size() != ds.dim()) {
        throw DimensionError("available_cases: mask length does not match dataset dimension");
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (mask_precedes(ds[i].mask(), m)) out.push_back(i);
    }
    return out;
}

MaskedSample remask(const MaskedSample& s, const Mask& target) {
    if (!mask_precedes(s.mask(), target)) {
        throw MaskOrderError("remask: sample mask " + s.mask().str() + " does not precede target " + target.str());
    }
    auto x = s.x();
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (target.missing(j)) x[j].reset();
    }
    return MaskedSample(std::move(x), target, s.y());
}

} // namespace cpmiss
