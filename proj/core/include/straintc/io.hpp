#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "straintc/degrade.hpp"
#include "straintc/fit.hpp"
#include "straintc/stack.hpp"

namespace straintc::io {

/// Stack file layout, all little-endian:
///
///   bytes  0..11  magic "STRAINTC-STK"
///   bytes 12..15  u32 format version (1)
///   u32 N, u32 H, u32 W, f64 sample_time_s, u8 kind (0 incremental,
///   1 cumulative), then N*H*W f64 in frame-major, row-major order.
inline constexpr std::string_view stack_magic = "STRAINTC-STK";
inline constexpr std::uint32_t stack_version = 1;

void write_stack(std::ostream &out, const StrainStack &stack);
StrainStack read_stack(std::istream &in);
void write_stack(const std::string &path, const StrainStack &stack);
StrainStack read_stack(const std::string &path);

/// CSV "frame,label,applied_snr_db" with 1-based frame numbers.
std::string mask_csv(const FrameQualityMask &mask);
FrameQualityMask parse_mask_csv(std::string_view text);
FrameQualityMask read_mask(const std::string &path);

/// Row-major CSV, one row per image row; NaN written as "nan".
std::string image_csv(const RealImage &image);
RealImage parse_image_csv(std::string_view text);

struct MapRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Linear map of finite values onto 1..255; non-finite pixels become 0.
/// The range is taken over finite values.
MapRange pgm_range(const RealImage &image);
std::string encode_pgm(const RealImage &image, MapRange range);
std::string range_sidecar(MapRange range);

/// Writes <stem>.csv, <stem>.pgm and <stem>.range.txt.
void write_tc_map(const std::string &stem, const RealImage &image);

/// Plain "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::string_view text);

std::string read_text(const std::string &path);
void write_text(const std::string &path, std::string_view text);

/// Shortest round-trippable decimal.
std::string format_double(double v);

} // namespace straintc::io
