#include "straintc/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "straintc/error.hpp"

namespace straintc::io {

namespace {

void put_u32(std::ostream &out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) {
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    }
    out.write(bytes, 4);
}

void put_u64(std::ostream &out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) {
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    }
    out.write(bytes, 8);
}

void put_f64(std::ostream &out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void get_bytes(std::istream &in, unsigned char *dst, std::size_t n) {
    in.read(reinterpret_cast<char *>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw Error(Errc::io_error, "stack file truncated");
    }
}

std::uint32_t get_u32(std::istream &in) {
    unsigned char b[4];
    get_bytes(in, b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

std::uint64_t get_u64(std::istream &in) {
    unsigned char b[8];
    get_bytes(in, b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

double get_f64(std::istream &in) { return std::bit_cast<double>(get_u64(in)); }

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return parts;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> lines;
    for (auto line : split(text, '\n')) {
        line = trim(line);
        if (!line.empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

double parse_double(std::string_view s) {
    s = trim(s);
    if (s == "nan" || s == "NaN") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw Error(Errc::io_error, "not a number: '" + std::string(s) + "'");
    }
    return v;
}

} // namespace

void write_stack(std::ostream &out, const StrainStack &stack) {
    out.write(stack_magic.data(), static_cast<std::streamsize>(stack_magic.size()));
    put_u32(out, stack_version);
    put_u32(out, static_cast<std::uint32_t>(stack.n_frames()));
    put_u32(out, static_cast<std::uint32_t>(stack.height()));
    put_u32(out, static_cast<std::uint32_t>(stack.width()));
    put_f64(out, stack.sample_time_s());
    const char kind = static_cast<char>(stack.kind());
    out.write(&kind, 1);
    for (double v : stack.data()) {
        put_f64(out, v);
    }
    if (!out) {
        throw Error(Errc::io_error, "failed to write stack");
    }
}

StrainStack read_stack(std::istream &in) {
    std::string magic(stack_magic.size(), '\0');
    in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (!in || magic != stack_magic) {
        throw Error(Errc::io_error, "not a stack file (bad magic)");
    }
    const std::uint32_t version = get_u32(in);
    if (version != stack_version) {
        throw Error(Errc::io_error, "unsupported stack file version " + std::to_string(version));
    }
    const std::uint32_t n = get_u32(in);
    const std::uint32_t h = get_u32(in);
    const std::uint32_t w = get_u32(in);
    const double ts = get_f64(in);
    unsigned char kind = 0;
    get_bytes(in, &kind, 1);
    if (kind > 1) {
        throw Error(Errc::io_error, "stack file has unknown kind flag " + std::to_string(kind));
    }
    StrainStack stack(n, h, w, ts, static_cast<StackKind>(kind));
    for (double &v : stack.data()) {
        v = get_f64(in);
    }
    return stack;
}

void write_stack(const std::string &path, const StrainStack &stack) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io_error, "cannot open '" + path + "' for writing");
    }
    write_stack(out, stack);
}

StrainStack read_stack(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::io_error, "cannot open '" + path + "'");
    }
    return read_stack(in);
}

std::string mask_csv(const FrameQualityMask &mask) {
    std::string out = "frame,label,applied_snr_db\n";
    for (std::size_t n = 0; n < mask.size(); ++n) {
        out += std::to_string(n + 1);
        out += mask.is_good(n) ? ",good," : ",bad,";
        out += format_double(mask.applied_snr_db[n]);
        out += '\n';
    }
    return out;
}

FrameQualityMask parse_mask_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines.front() != "frame,label,applied_snr_db") {
        throw Error(Errc::io_error, "mask file: missing 'frame,label,applied_snr_db' header");
    }
    FrameQualityMask mask;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split(lines[i], ',');
        if (cells.size() != 3) {
            throw Error(Errc::io_error, "mask file: expected 3 columns on line " + std::to_string(i + 1));
        }
        if (static_cast<std::size_t>(parse_double(cells[0])) != i) {
            throw Error(Errc::io_error, "mask file: frames must be numbered 1..N in order");
        }
        const auto label = trim(cells[1]);
        if (label == "good") {
            mask.labels.push_back(FrameLabel::good);
        } else if (label == "bad") {
            mask.labels.push_back(FrameLabel::bad);
        } else {
            throw Error(Errc::io_error, "mask file: unknown label '" + std::string(label) + "'");
        }
        mask.applied_snr_db.push_back(parse_double(cells[2]));
    }
    return mask;
}

FrameQualityMask read_mask(const std::string &path) { return parse_mask_csv(read_text(path)); }

std::string image_csv(const RealImage &image) {
    std::string out;
    for (std::size_t r = 0; r < image.height; ++r) {
        for (std::size_t c = 0; c < image.width; ++c) {
            if (c > 0) {
                out += ',';
            }
            out += format_double(image(r, c));
        }
        out += '\n';
    }
    return out;
}

RealImage parse_image_csv(std::string_view text) {
    const auto lines = lines_of(text);
    RealImage image;
    image.height = lines.size();
    for (const auto line : lines) {
        const auto cells = split(line, ',');
        if (image.width == 0) {
            image.width = cells.size();
        } else if (cells.size() != image.width) {
            throw Error(Errc::io_error, "image CSV rows have different lengths");
        }
        for (const auto cell : cells) {
            image.values.push_back(parse_double(cell));
        }
    }
    return image;
}

MapRange pgm_range(const RealImage &image) {
    MapRange range{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (double v : image.values) {
        if (std::isfinite(v)) {
            range.lo = std::min(range.lo, v);
            range.hi = std::max(range.hi, v);
        }
    }
    if (range.lo > range.hi) {
        return {0.0, 0.0};
    }
    return range;
}

std::string encode_pgm(const RealImage &image, MapRange range) {
    std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    const double span = range.hi - range.lo;
    for (double v : image.values) {
        unsigned char level = 0;
        if (std::isfinite(v)) {
            const double unit = span > 0.0 ? std::clamp((v - range.lo) / span, 0.0, 1.0) : 0.5;
            level = static_cast<unsigned char>(1 + std::lround(unit * 254.0));
        }
        out.push_back(static_cast<char>(level));
    }
    return out;
}

std::string range_sidecar(MapRange range) {
    return "min = " + format_double(range.lo) + "\nmax = " + format_double(range.hi) +
           "\n# gray 1 maps to min, 255 to max, linear in between; 0 marks non-converged pixels\n";
}

void write_tc_map(const std::string &stem, const RealImage &image) {
    const MapRange range = pgm_range(image);
    write_text(stem + ".csv", image_csv(image));
    write_text(stem + ".pgm", encode_pgm(image, range));
    write_text(stem + ".range.txt", range_sidecar(range));
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> kv;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
            throw Error(Errc::invalid_argument, "expected 'key = value' on line " + std::to_string(line_no));
        }
        kv[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
    }
    return kv;
}

std::string read_text(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::io_error, "cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string &path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io_error, "cannot open '" + path + "' for writing");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error(Errc::io_error, "failed to write '" + path + "'");
    }
}

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace straintc::io
