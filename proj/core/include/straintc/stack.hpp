#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace straintc {

enum class StackKind : unsigned char { incremental = 0, cumulative = 1 };

/// Row-major H x W image.
template <typename T> struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<T> values;

    Image() = default;
    Image(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), values(h * w, fill) {}

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    T &operator()(std::size_t row, std::size_t col) { return values[row * width + col]; }
    const T &operator()(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

using RealImage = Image<double>;
using MaskImage = Image<unsigned char>;

/// N temporal frames of H x W strain. Frame i (0-based) is sampled at
/// t = (i + 1) * sample_time_s.
class StrainStack {
  public:
    StrainStack() = default;
    StrainStack(std::size_t n_frames, std::size_t height, std::size_t width, double sample_time_s,
                StackKind kind);

    [[nodiscard]] std::size_t n_frames() const noexcept { return n_frames_; }
    [[nodiscard]] std::size_t height() const noexcept { return height_; }
    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t pixels() const noexcept { return height_ * width_; }
    [[nodiscard]] double sample_time_s() const noexcept { return sample_time_s_; }
    [[nodiscard]] StackKind kind() const noexcept { return kind_; }
    void set_kind(StackKind kind) noexcept { kind_ = kind; }

    [[nodiscard]] double time_of(std::size_t frame) const noexcept {
        return static_cast<double>(frame + 1) * sample_time_s_;
    }
    [[nodiscard]] std::vector<double> times() const;

    [[nodiscard]] std::span<double> frame(std::size_t n) {
        return {data_.data() + n * pixels(), pixels()};
    }
    [[nodiscard]] std::span<const double> frame(std::size_t n) const {
        return {data_.data() + n * pixels(), pixels()};
    }

    double &at(std::size_t n, std::size_t pixel) { return data_[n * pixels() + pixel]; }
    [[nodiscard]] double at(std::size_t n, std::size_t pixel) const { return data_[n * pixels() + pixel]; }

    /// Copies the temporal curve of one pixel into `out` (resized to N).
    void pixel_series(std::size_t pixel, std::vector<double> &out) const;
    void set_pixel_series(std::size_t pixel, std::span<const double> series);

    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }

    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const StrainStack &, const StrainStack &) = default;

  private:
    std::size_t n_frames_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    double sample_time_s_ = 0.0;
    StackKind kind_ = StackKind::incremental;
    std::vector<double> data_;
};

} // namespace straintc
