#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cpmiss {

/// Missingness pattern over d covariates: bit j is 1 when covariate j is missing.
class Mask {
public:
    Mask() = default;
    explicit Mask(std::size_t d, bool missing = false) : bits_(d, missing ? 1 : 0) {}
    explicit Mask(std::vector<std::uint8_t> bits);

    /// Parses "110" or "[110]".
    static Mask parse(std::string_view text);

    std::size_t size() const noexcept { return bits_.size(); }
    bool missing(std::size_t j) const { return bits_.at(j) != 0; }
    bool observed(std::size_t j) const { return bits_.at(j) == 0; }
    void set_missing(std::size_t j, bool value) { bits_.at(j) = value ? 1 : 0; }

    /// Number of missing covariates.
    std::size_t count() const noexcept;
    bool all_missing() const noexcept { return count() == size(); }
    bool none_missing() const noexcept { return count() == 0; }

    std::vector<std::size_t> observed_indices() const;
    std::vector<std::size_t> missing_indices() const;

    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    /// Bit string such as "110".
    std::string str() const;

    friend bool operator==(const Mask&, const Mask&) = default;
    friend auto operator<=>(const Mask&, const Mask&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// True iff every covariate missing under `lower` is also missing under `upper`.
bool mask_precedes(const Mask& lower, const Mask& upper);

/// One (X, M, Y) realization. The mask is always consistent with the presence
/// flags of `x`.
class MaskedSample {
public:
    MaskedSample() = default;

    /// Mask derived from the presence flags of `x`.
    explicit MaskedSample(std::vector<std::optional<double>> x, std::optional<double> y = std::nullopt);

    /// Throws DataError when `mask` disagrees with the presence flags of `x`.
    MaskedSample(std::vector<std::optional<double>> x, Mask mask, std::optional<double> y);

    /// Fully observed sample with the given mask applied (masked entries dropped).
    static MaskedSample from_complete(std::span<const double> x, const Mask& mask,
                                      std::optional<double> y = std::nullopt);

    std::size_t dim() const noexcept { return x_.size(); }
    const std::vector<std::optional<double>>& x() const noexcept { return x_; }
    const Mask& mask() const noexcept { return mask_; }
    const std::optional<double>& y() const noexcept { return y_; }

    /// Value of covariate j; throws when it is missing.
    double value(std::size_t j) const;

private:
    std::vector<std::optional<double>> x_;
    Mask mask_;
    std::optional<double> y_;
};

struct ColumnRange {
    double min = 0.0;
    double max = 0.0;
    bool any_observed = false;

    /// Normalizing range; constant or entirely missing columns use 1.
    double range() const noexcept;
};

/// Collection of samples that share a dimension, with observed-value column ranges.
class MaskedDataset {
public:
    MaskedDataset() = default;
    explicit MaskedDataset(std::size_t d) : d_(d) {}
    MaskedDataset(std::size_t d, std::vector<MaskedSample> samples);

    void push_back(MaskedSample s);

    std::size_t dim() const noexcept { return d_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    const MaskedSample& operator[](std::size_t i) const { return samples_[i]; }
    const std::vector<MaskedSample>& samples() const noexcept { return samples_; }
    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }

    const std::vector<ColumnRange>& column_ranges() const noexcept { return ranges_; }
    /// Per-column normalizing ranges (see ColumnRange::range).
    std::vector<double> ranges() const;

    /// True when every sample carries a response.
    bool has_responses() const;

    MaskedDataset subset(std::span<const std::size_t> indices) const;

private:
    std::size_t d_ = 0;
    std::vector<MaskedSample> samples_;
    std::vector<ColumnRange> ranges_;
};

/// Indices i (in original order) with ds[i].mask() preceding `m`.
std::vector<std::size_t> available_cases(const MaskedDataset& ds, const Mask& m);

/// Hides additional entries of `s` so that its mask becomes exactly `target`.
/// Throws MaskOrderError unless s.mask() precedes `target`.
MaskedSample remask(const MaskedSample& s, const Mask& target);

} // namespace cpmiss
