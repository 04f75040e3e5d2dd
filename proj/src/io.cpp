#include "fringeforge/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fringeforge/errors.hpp"

namespace fringeforge {
namespace {

// Binary containers store multi-byte samples explicitly; float32 payloads
// assume a little-endian host, which matches every platform we target.

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading: " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    return out;
}

void check_stream(const std::ostream& out, const std::filesystem::path& path) {
    if (!out) throw IoError("write failed: " + path.string());
}

std::string next_token(std::istream& in, const std::filesystem::path& path) {
    std::string tok;
    if (!(in >> tok)) throw IoError("truncated header in " + path.string());
    return tok;
}

int parse_dim(const std::string& tok, const std::filesystem::path& path) {
    try {
        const int v = std::stoi(tok);
        if (v <= 0) throw std::invalid_argument("non-positive");
        return v;
    } catch (const std::exception&) {
        throw IoError("bad image dimension '" + tok + "' in " + path.string());
    }
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const ScalarMap& map) {
    if (map.width <= 0 || map.height <= 0)
        throw IoError("refusing to write empty image: " + path.string());
    auto out = open_output(path);
    out << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(map.width));
    for (int y = map.height - 1; y >= 0; --y) {  // PFM rows run bottom-up
        for (int x = 0; x < map.width; ++x) {
            const std::size_t i = map.index(x, y);
            row[static_cast<std::size_t>(x)] =
                map.mask[i] ? static_cast<float>(map.values[i])
                            : std::numeric_limits<float>::quiet_NaN();
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    check_stream(out, path);
}

ScalarMap read_pfm(const std::filesystem::path& path) {
    auto in = open_input(path);
    if (next_token(in, path) != "Pf")
        throw IoError("not a grayscale PFM file: " + path.string());
    const int width = parse_dim(next_token(in, path), path);
    const int height = parse_dim(next_token(in, path), path);
    const double scale = [&] {
        try {
            return std::stod(next_token(in, path));
        } catch (const std::exception&) {
            throw IoError("bad scale field in " + path.string());
        }
    }();
    if (scale >= 0.0)
        throw IoError("big-endian PFM is not supported: " + path.string());
    in.get();  // single whitespace byte separating header and samples

    ScalarMap map(width, height);
    std::vector<float> row(static_cast<std::size_t>(width));
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw IoError("truncated pixel data in " + path.string());
        for (int x = 0; x < width; ++x) {
            const float v = row[static_cast<std::size_t>(x)];
            const std::size_t i = map.index(x, y);
            if (std::isfinite(v)) {
                map.values[i] = static_cast<double>(v);
                map.mask[i] = 1;
            } else {
                map.values[i] = 0.0;
                map.mask[i] = 0;
            }
        }
    }
    return map;
}

void write_pgm16(const std::filesystem::path& path, const ScalarMap& map, double lo, double hi) {
    if (!(hi > lo)) throw IoError("pgm16 scale range must satisfy hi > lo");
    if (map.width <= 0 || map.height <= 0)
        throw IoError("refusing to write empty image: " + path.string());
    auto out = open_output(path);
    out << "P5\n" << map.width << " " << map.height << "\n65535\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(map.width) * 2);
    const double span = hi - lo;
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const std::size_t i = map.index(x, y);
            std::uint16_t q = 0;
            if (map.mask[i]) {
                const double t = (map.values[i] - lo) / span;
                const double s = std::clamp(t, 0.0, 1.0) * 65535.0;
                q = static_cast<std::uint16_t>(std::lround(s));
            }
            row[static_cast<std::size_t>(x) * 2] = static_cast<unsigned char>(q >> 8);
            row[static_cast<std::size_t>(x) * 2 + 1] = static_cast<unsigned char>(q & 0xFF);
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    check_stream(out, path);
}

ScalarMap read_pgm16(const std::filesystem::path& path, double lo, double hi) {
    if (!(hi > lo)) throw IoError("pgm16 scale range must satisfy hi > lo");
    auto in = open_input(path);
    if (next_token(in, path) != "P5")
        throw IoError("not a binary PGM file: " + path.string());
    const int width = parse_dim(next_token(in, path), path);
    const int height = parse_dim(next_token(in, path), path);
    const int maxval = parse_dim(next_token(in, path), path);
    if (maxval != 65535)
        throw IoError("expected 16-bit PGM (maxval 65535) in " + path.string());
    in.get();

    ScalarMap map(width, height);
    std::vector<unsigned char> row(static_cast<std::size_t>(width) * 2);
    const double span = hi - lo;
    for (int y = 0; y < height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError("truncated pixel data in " + path.string());
        for (int x = 0; x < width; ++x) {
            const unsigned hi_byte = row[static_cast<std::size_t>(x) * 2];
            const unsigned lo_byte = row[static_cast<std::size_t>(x) * 2 + 1];
            const double q = static_cast<double>((hi_byte << 8) | lo_byte);
            const std::size_t i = map.index(x, y);
            map.values[i] = lo + q / 65535.0 * span;
            map.mask[i] = 1;
        }
    }
    return map;
}

void write_pgm16_raw(const std::filesystem::path& path, const IndexMap& map) {
    if (map.width <= 0 || map.height <= 0)
        throw IoError("refusing to write empty image: " + path.string());
    auto out = open_output(path);
    out << "P5\n" << map.width << " " << map.height << "\n65535\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(map.width) * 2);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const std::size_t i = map.index(x, y);
            const std::int32_t v = map.mask[i] ? map.values[i] : 0;
            if (v < 0 || v > 65535)
                throw IoError("label value out of 16-bit range: " + path.string());
            row[static_cast<std::size_t>(x) * 2] = static_cast<unsigned char>(v >> 8);
            row[static_cast<std::size_t>(x) * 2 + 1] = static_cast<unsigned char>(v & 0xFF);
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    check_stream(out, path);
}

IndexMap read_pgm16_raw(const std::filesystem::path& path) {
    auto in = open_input(path);
    if (next_token(in, path) != "P5")
        throw IoError("not a binary PGM file: " + path.string());
    const int width = parse_dim(next_token(in, path), path);
    const int height = parse_dim(next_token(in, path), path);
    const int maxval = parse_dim(next_token(in, path), path);
    if (maxval != 65535)
        throw IoError("expected 16-bit PGM (maxval 65535) in " + path.string());
    in.get();

    IndexMap map(width, height);
    std::vector<unsigned char> row(static_cast<std::size_t>(width) * 2);
    for (int y = 0; y < height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError("truncated pixel data in " + path.string());
        for (int x = 0; x < width; ++x) {
            const unsigned hi_byte = row[static_cast<std::size_t>(x) * 2];
            const unsigned lo_byte = row[static_cast<std::size_t>(x) * 2 + 1];
            const std::size_t i = map.index(x, y);
            map.values[i] = static_cast<std::int32_t>((hi_byte << 8) | lo_byte);
            map.mask[i] = 1;
        }
    }
    return map;
}

void write_ply(const std::filesystem::path& path, const std::vector<CloudPoint>& points) {
    auto out = open_output(path);
    out << "ply\nformat ascii 1.0\n"
        << "element vertex " << points.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar quality\n"
        << "end_header\n";
    char line[128];
    for (const auto& p : points) {
        // %.9g keeps float32 coordinates exact across a write/read cycle.
        std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %u\n",
                      static_cast<double>(static_cast<float>(p.position.x)),
                      static_cast<double>(static_cast<float>(p.position.y)),
                      static_cast<double>(static_cast<float>(p.position.z)),
                      static_cast<unsigned>(p.quality));
        out << line;
    }
    check_stream(out, path);
}

std::vector<CloudPoint> read_ply(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line) || line != "ply")
        throw IoError("not a PLY file: " + path.string());
    std::size_t count = 0;
    bool ascii = false;
    while (std::getline(in, line)) {
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = (fmt == "ascii");
        } else if (key == "element") {
            std::string what;
            ls >> what;
            if (what == "vertex") ls >> count;
        }
    }
    if (!ascii) throw IoError("only ascii PLY is supported: " + path.string());
    std::vector<CloudPoint> points;
    points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        CloudPoint p;
        // Parse through float so stored float32 coordinates come back
        // bit-exact instead of as the decimal-nearest double.
        float x = 0.0f, y = 0.0f, z = 0.0f;
        unsigned q = 0;
        if (!(in >> x >> y >> z >> q))
            throw IoError("truncated vertex data in " + path.string());
        p.position = Vec3{x, y, z};
        p.quality = static_cast<std::uint8_t>(q);
        points.push_back(p);
    }
    return points;
}

namespace {

const char* frequency_name(FrequencyTag tag) {
    return tag == FrequencyTag::High ? "high" : "low";
}

FrequencyTag parse_frequency(const std::string& name, const std::filesystem::path& path) {
    if (name == "high") return FrequencyTag::High;
    if (name == "low") return FrequencyTag::Low;
    throw IoError("unknown frequency tag '" + name + "' in " + path.string());
}

}  // namespace

void save_manifest(const std::filesystem::path& path, const StackManifest& manifest) {
    nlohmann::json doc;
    doc["format"] = "fringeforge-stack/1";
    doc["frequency"] = frequency_name(manifest.frequency);
    doc["frame_files"] = manifest.frame_files;
    doc["shifts_rad"] = manifest.shifts;
    doc["wavelength"] = manifest.wavelength;
    doc["intensity_lo"] = manifest.intensity_lo;
    doc["intensity_hi"] = manifest.intensity_hi;
    doc["seed"] = manifest.seed;
    doc["config_hash"] = manifest.config_hash;
    write_text_file(path, doc.dump(2) + "\n");
}

StackManifest load_manifest(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse manifest " + path.string() + ": " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "fringeforge-stack/1")
            throw IoError("unsupported manifest format in " + path.string());
        StackManifest m;
        m.frequency = parse_frequency(doc.at("frequency").get<std::string>(), path);
        m.frame_files = doc.at("frame_files").get<std::vector<std::string>>();
        m.shifts = doc.at("shifts_rad").get<std::vector<double>>();
        m.wavelength = doc.at("wavelength").get<double>();
        m.intensity_lo = doc.value("intensity_lo", 0.0);
        m.intensity_hi = doc.value("intensity_hi", 1.0);
        m.seed = doc.value("seed", std::uint64_t{0});
        m.config_hash = doc.value("config_hash", std::string{});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad manifest " + path.string() + ": " + e.what());
    }
}

FringeStack load_stack(const std::filesystem::path& manifest_path) {
    const StackManifest m = load_manifest(manifest_path);
    if (m.frame_files.size() != m.shifts.size())
        throw IoError("manifest frame/shift count mismatch: " + manifest_path.string());
    const std::filesystem::path dir = manifest_path.parent_path();
    FringeStack stack;
    stack.frequency = m.frequency;
    stack.shifts = m.shifts;
    if (m.wavelength > 0.0) stack.wavelength = m.wavelength;
    for (const auto& name : m.frame_files) {
        const std::filesystem::path frame = dir / name;
        if (!std::filesystem::exists(frame))
            throw IoError("missing frame file: " + frame.string());
        stack.frames.push_back(read_pgm16(frame, m.intensity_lo, m.intensity_hi));
    }
    const auto violations = validate_stack(stack);
    if (!violations.empty())
        throw InvalidStack("stack from " + manifest_path.string() + " is invalid: " + violations.front());
    return stack;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::vector<std::string>>& rows) {
    auto out = open_output(path);
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    check_stream(out, path);
}

std::string read_text_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    auto out = open_output(path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    check_stream(out, path);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace fringeforge
