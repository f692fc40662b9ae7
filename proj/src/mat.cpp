#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <zlib.h>

#include "vibfault/errors.hpp"
#include "vibfault/ingest.hpp"

// MAT-file level 5 reader, restricted to what CWRU-style files need:
// double-class numeric matrices, optionally wrapped in deflate-compressed
// elements. Cell arrays, structs and friends are skipped with a warning.

namespace vibfault::ingest {

namespace {

// Element data types.
constexpr std::uint32_t kMiInt8 = 1;
constexpr std::uint32_t kMiUInt8 = 2;
constexpr std::uint32_t kMiInt16 = 3;
constexpr std::uint32_t kMiUInt16 = 4;
constexpr std::uint32_t kMiInt32 = 5;
constexpr std::uint32_t kMiUInt32 = 6;
constexpr std::uint32_t kMiSingle = 7;
constexpr std::uint32_t kMiDouble = 9;
constexpr std::uint32_t kMiInt64 = 12;
constexpr std::uint32_t kMiUInt64 = 13;
constexpr std::uint32_t kMiMatrix = 14;
constexpr std::uint32_t kMiCompressed = 15;

constexpr std::uint32_t kMxDoubleClass = 6;

[[noreturn]] void corrupt(const char* what) {
    throw ValidationError(std::string("corrupt file: ") + what);
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    bool at_end() const { return pos_ >= bytes_.size(); }

    void require(std::size_t n, const char* what) const {
        if (remaining() < n) corrupt(what);
    }

    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        require(n, what);
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint32_t u32(const char* what) {
        const auto b = take(4, what);
        std::uint32_t v;
        std::memcpy(&v, b.data(), 4);
        if (swap_) v = __builtin_bswap32(v);
        return v;
    }

    void skip_padding() {
        const std::size_t rem = pos_ % 8;
        if (rem != 0) pos_ += std::min(remaining(), 8 - rem);
    }

    bool swap() const { return swap_; }

private:
    std::span<const std::uint8_t> bytes_;
    bool swap_;
    std::size_t pos_ = 0;
};

struct RawElement {
    std::uint32_t type = 0;
    std::span<const std::uint8_t> payload;
};

// A tag is 8 bytes, or 4 when the small-element format packs size<=4 into the
// upper half of the type word.
RawElement read_element(Reader& r) {
    RawElement el;
    const std::uint32_t word = r.u32("element tag");
    if ((word & 0xffff0000u) != 0) {
        el.type = word & 0xffffu;
        const std::uint32_t size = word >> 16;
        if (size > 4) corrupt("small element size");
        auto slot = r.take(4, "small element payload");
        el.payload = slot.subspan(0, size);
    } else {
        el.type = word;
        const std::uint32_t size = r.u32("element size");
        el.payload = r.take(size, "element payload");
        // Compressed elements are written back to back without padding.
        if (el.type != kMiCompressed) r.skip_padding();
    }
    return el;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> in) {
    std::vector<std::uint8_t> out(std::max<std::size_t>(in.size() * 4, 1024));
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) corrupt("zlib init");
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    std::size_t written = 0;
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        if (written == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + written;
        zs.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        written = out.size() - zs.avail_out;
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            corrupt("deflate stream");
        }
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            corrupt("truncated deflate stream");
        }
    }
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

double convert_scalar(std::uint32_t type, const std::uint8_t* p, bool swap) {
    switch (type) {
        case kMiInt8: return static_cast<double>(static_cast<std::int8_t>(*p));
        case kMiUInt8: return static_cast<double>(*p);
        case kMiInt16: {
            std::uint16_t v;
            std::memcpy(&v, p, 2);
            if (swap) v = __builtin_bswap16(v);
            return static_cast<double>(static_cast<std::int16_t>(v));
        }
        case kMiUInt16: {
            std::uint16_t v;
            std::memcpy(&v, p, 2);
            if (swap) v = __builtin_bswap16(v);
            return static_cast<double>(v);
        }
        case kMiInt32: {
            std::uint32_t v;
            std::memcpy(&v, p, 4);
            if (swap) v = __builtin_bswap32(v);
            return static_cast<double>(static_cast<std::int32_t>(v));
        }
        case kMiUInt32: {
            std::uint32_t v;
            std::memcpy(&v, p, 4);
            if (swap) v = __builtin_bswap32(v);
            return static_cast<double>(v);
        }
        case kMiSingle: {
            std::uint32_t v;
            std::memcpy(&v, p, 4);
            if (swap) v = __builtin_bswap32(v);
            return static_cast<double>(std::bit_cast<float>(v));
        }
        case kMiDouble: {
            std::uint64_t v;
            std::memcpy(&v, p, 8);
            if (swap) v = __builtin_bswap64(v);
            return std::bit_cast<double>(v);
        }
        case kMiInt64: {
            std::uint64_t v;
            std::memcpy(&v, p, 8);
            if (swap) v = __builtin_bswap64(v);
            return static_cast<double>(static_cast<std::int64_t>(v));
        }
        case kMiUInt64: {
            std::uint64_t v;
            std::memcpy(&v, p, 8);
            if (swap) v = __builtin_bswap64(v);
            return static_cast<double>(v);
        }
        default: corrupt("numeric storage type");
    }
}

std::size_t scalar_width(std::uint32_t type) {
    switch (type) {
        case kMiInt8:
        case kMiUInt8: return 1;
        case kMiInt16:
        case kMiUInt16: return 2;
        case kMiInt32:
        case kMiUInt32:
        case kMiSingle: return 4;
        case kMiDouble:
        case kMiInt64:
        case kMiUInt64: return 8;
        default: return 0;
    }
}

// Parses one miMATRIX payload; returns nothing if the class is unsupported.
std::optional<MatVariable> parse_matrix(std::span<const std::uint8_t> payload, bool swap,
                                        std::vector<std::string>* warnings) {
    Reader r(payload, swap);

    const RawElement flags_el = read_element(r);
    if (flags_el.type != kMiUInt32 || flags_el.payload.size() < 8) corrupt("array flags");
    std::uint32_t flags;
    std::memcpy(&flags, flags_el.payload.data(), 4);
    if (swap) flags = __builtin_bswap32(flags);
    const std::uint32_t array_class = flags & 0xffu;
    const bool is_complex = (flags & 0x0800u) != 0;

    const RawElement dims_el = read_element(r);
    if (dims_el.type != kMiInt32) corrupt("dimensions element");
    const std::size_t ndims = dims_el.payload.size() / 4;
    std::vector<std::size_t> dims(ndims);
    std::size_t expected = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
        std::uint32_t v;
        std::memcpy(&v, dims_el.payload.data() + i * 4, 4);
        if (swap) v = __builtin_bswap32(v);
        const auto d = static_cast<std::int32_t>(v);
        if (d < 0) corrupt("negative dimension");
        dims[i] = static_cast<std::size_t>(d);
        expected *= dims[i];
    }

    const RawElement name_el = read_element(r);
    if (name_el.type != kMiInt8) corrupt("name element");
    std::string name(reinterpret_cast<const char*>(name_el.payload.data()),
                     name_el.payload.size());

    if (array_class != kMxDoubleClass) {
        if (warnings)
            warnings->push_back("skipping variable '" + name + "': unsupported matrix class " +
                                std::to_string(array_class));
        return std::nullopt;
    }

    const RawElement data_el = read_element(r);
    const std::size_t width = scalar_width(data_el.type);
    if (width == 0) corrupt("real part storage type");
    const std::size_t count = data_el.payload.size() / width;
    if (count != expected) corrupt("element count does not match dimensions");

    MatVariable var;
    var.name = std::move(name);
    var.dims = std::move(dims);
    var.data.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        var.data[i] = convert_scalar(data_el.type, data_el.payload.data() + i * width, swap);

    if (is_complex && warnings)
        warnings->push_back("variable '" + var.name + "': imaginary part ignored");
    return var;
}

void parse_top_level(Reader& r, std::vector<MatVariable>& vars,
                     std::vector<std::string>* warnings) {
    while (!r.at_end()) {
        if (r.remaining() < 8) break; // trailing padding
        const RawElement el = read_element(r);
        if (el.type == kMiCompressed) {
            const auto inflated = inflate_bytes(el.payload);
            Reader inner(std::span<const std::uint8_t>(inflated.data(), inflated.size()),
                         r.swap());
            const RawElement unwrapped = read_element(inner);
            if (unwrapped.type == kMiMatrix) {
                if (auto var = parse_matrix(unwrapped.payload, r.swap(), warnings))
                    vars.push_back(std::move(*var));
            } else if (warnings) {
                warnings->push_back("skipping compressed element of type " +
                                    std::to_string(unwrapped.type));
            }
        } else if (el.type == kMiMatrix) {
            if (auto var = parse_matrix(el.payload, r.swap(), warnings))
                vars.push_back(std::move(*var));
        } else if (warnings) {
            warnings->push_back("skipping top-level element of type " + std::to_string(el.type));
        }
    }
}

} // namespace

std::vector<MatVariable> read_mat(std::span<const std::uint8_t> bytes,
                                  std::vector<std::string>* warnings) {
    if (bytes.size() < 128) throw ValidationError("unsupported container: no MAT v5 header");
    const std::uint8_t e0 = bytes[126], e1 = bytes[127];
    bool swap;
    if (e0 == 'I' && e1 == 'M') {
        swap = false; // little-endian file on a little-endian host
    } else if (e0 == 'M' && e1 == 'I') {
        swap = true;
    } else {
        throw ValidationError("unsupported container: bad endian indicator");
    }
    std::uint16_t version;
    std::memcpy(&version, bytes.data() + 124, 2);
    if (swap) version = __builtin_bswap16(version);
    if (version != 0x0100) throw ValidationError("unsupported container: bad version");

    Reader r(bytes.subspan(128), swap);
    std::vector<MatVariable> vars;
    parse_top_level(r, vars, warnings);
    return vars;
}

std::vector<MatVariable> read_mat_file(const std::string& path,
                                       std::vector<std::string>* warnings) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return read_mat(std::span<const std::uint8_t>(bytes.data(), bytes.size()), warnings);
}

std::vector<MatVariable> select_drive_end(const std::vector<MatVariable>& vars) {
    std::vector<MatVariable> out;
    for (const auto& v : vars) {
        static const std::string suffix = "_DE_time";
        if (v.name.size() >= suffix.size() &&
            v.name.compare(v.name.size() - suffix.size(), suffix.size(), suffix) == 0)
            out.push_back(v);
    }
    return out;
}

} // namespace vibfault::ingest
