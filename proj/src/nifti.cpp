#include "pnidiff/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

namespace pnidiff {

namespace {

constexpr int64_t kHeaderSize = 348;
constexpr int64_t kMaxVoxels = int64_t(1) << 31;
constexpr size_t kMaxDecompressed = size_t(256) << 20;

bool has_gzip_magic(const std::vector<uint8_t>& buf) {
  return buf.size() >= 2 && buf[0] == 0x1f && buf[1] == 0x8b;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NiftiError("cannot open file: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw NiftiError("I/O failure reading " + path);
  return buf;
}

std::vector<uint8_t> gunzip(const std::vector<uint8_t>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw NiftiError("gzip: inflateInit failed");
  std::vector<uint8_t> out;
  out.reserve(in.size() * 4);
  std::vector<uint8_t> chunk(1 << 16);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw NiftiError("gzip: corrupt stream", static_cast<int64_t>(zs.total_in));
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (out.size() > kMaxDecompressed) {
      inflateEnd(&zs);
      throw NiftiError("gzip: decompressed payload exceeds limit");
    }
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw NiftiError("gzip: truncated stream", static_cast<int64_t>(in.size()));
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<uint8_t> gzip_bytes(const std::vector<uint8_t>& in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw NiftiError("gzip: deflateInit failed");
  std::vector<uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  if (deflate(&zs, Z_FINISH) != Z_STREAM_END) {
    deflateEnd(&zs);
    throw NiftiError("gzip: compression failed");
  }
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

struct FieldReader {
  const std::vector<uint8_t>& buf;
  bool swap = false;

  uint32_t u32(int64_t off) const {
    uint8_t b[4];
    std::memcpy(b, buf.data() + off, 4);
    if (swap) {
      std::swap(b[0], b[3]);
      std::swap(b[1], b[2]);
    }
    uint32_t v;
    std::memcpy(&v, b, 4);
    return v;
  }
  int32_t i32(int64_t off) const { return static_cast<int32_t>(u32(off)); }
  int16_t i16(int64_t off) const {
    uint8_t b[2];
    std::memcpy(b, buf.data() + off, 2);
    if (swap) std::swap(b[0], b[1]);
    int16_t v;
    std::memcpy(&v, b, 2);
    return v;
  }
  float f32(int64_t off) const {
    uint32_t raw = u32(off);
    float v;
    std::memcpy(&v, &raw, 4);
    return v;
  }
};

struct ParsedHeader {
  int64_t nx, ny, nz;
  NiftiDatatype dtype;
  int bitpix;
  double spacing[3];
  int64_t vox_offset;
  double slope, inter;
  OrientationPassThrough orient;
  std::array<double, 3> origin;
  bool swapped;
  char magic[4];
};

ParsedHeader parse_header(const std::vector<uint8_t>& buf) {
  if (static_cast<int64_t>(buf.size()) < kHeaderSize)
    throw NiftiError("truncated header: need " + std::to_string(kHeaderSize) + " bytes",
                     static_cast<int64_t>(buf.size()));

  // dim[0] sanity check selects endianness
  FieldReader rd{buf, false};
  int16_t ndim = rd.i16(40);
  if (ndim < 1 || ndim > 7) {
    rd.swap = true;
    ndim = rd.i16(40);
    if (ndim < 1 || ndim > 7) throw NiftiError("bad dim[0]: not a NIfTI-1 header", 40);
  }

  if (rd.i32(0) != kHeaderSize) throw NiftiError("sizeof_hdr != 348: not a NIfTI-1 header", 0);

  ParsedHeader h{};
  h.swapped = rd.swap;
  std::memcpy(h.magic, buf.data() + 344, 4);
  const bool nplus = std::memcmp(h.magic, "n+1", 4) == 0;
  const bool ni1 = std::memcmp(h.magic, "ni1", 4) == 0;
  if (!nplus && !ni1) throw NiftiError("bad magic: expected \"n+1\" or \"ni1\"", 344);

  if (ndim != 3)
    throw NiftiError(
        "unsupported: dim[0] = " + std::to_string(ndim) + "; only 3-D volumes are handled", 40);
  h.nx = rd.i16(42);
  h.ny = rd.i16(44);
  h.nz = rd.i16(46);
  if (h.nx < 1 || h.ny < 1 || h.nz < 1) throw NiftiError("non-positive image dimension", 42);
  if (h.nx * h.ny * h.nz > kMaxVoxels) throw NiftiError("image dimensions exceed limit", 42);

  const int16_t dt = rd.i16(70);
  if (dt != 2 && dt != 4 && dt != 16)
    throw NiftiError("unsupported datatype code " + std::to_string(dt) +
                         " (supported: uint8=2, int16=4, float32=16)",
                     70);
  h.dtype = static_cast<NiftiDatatype>(dt);
  h.bitpix = rd.i16(72);
  const int expected_bitpix = dt == 2 ? 8 : (dt == 4 ? 16 : 32);
  if (h.bitpix != expected_bitpix)
    throw NiftiError("bitpix " + std::to_string(h.bitpix) + " inconsistent with datatype", 72);

  for (int i = 0; i < 3; ++i) {
    const float p = rd.f32(76 + 4 * (i + 1));
    if (!std::isfinite(p) || p <= 0.0f)
      throw NiftiError("non-positive pixdim on axis " + std::to_string(i), 76 + 4 * (i + 1));
    h.spacing[i] = p;
  }

  const float vo = rd.f32(108);
  if (!std::isfinite(vo) || vo < 0.0f) throw NiftiError("bad vox_offset", 108);
  h.vox_offset = static_cast<int64_t>(vo);
  if (nplus && h.vox_offset < kHeaderSize)
    throw NiftiError("vox_offset inside header for \"n+1\" file", 108);

  h.slope = rd.f32(112);
  h.inter = rd.f32(116);
  if (!std::isfinite(h.slope) || !std::isfinite(h.inter))
    throw NiftiError("non-finite scl_slope/scl_inter", 112);

  h.orient.qform_code = rd.i16(252);
  h.orient.sform_code = rd.i16(254);
  for (int i = 0; i < 3; ++i) h.orient.quatern[static_cast<size_t>(i)] = rd.f32(256 + 4 * i);
  h.origin = {rd.f32(268), rd.f32(272), rd.f32(276)};
  for (int i = 0; i < 12; ++i) h.orient.srow[static_cast<size_t>(i)] = rd.f32(280 + 4 * i);
  return h;
}

double decode_voxel(const uint8_t* p, NiftiDatatype dt, bool swap) {
  switch (dt) {
    case NiftiDatatype::Uint8:
      return static_cast<double>(*p);
    case NiftiDatatype::Int16: {
      uint8_t b[2] = {p[0], p[1]};
      if (swap) std::swap(b[0], b[1]);
      int16_t v;
      std::memcpy(&v, b, 2);
      return static_cast<double>(v);
    }
    case NiftiDatatype::Float32: {
      uint8_t b[4] = {p[0], p[1], p[2], p[3]};
      if (swap) {
        std::swap(b[0], b[3]);
        std::swap(b[1], b[2]);
      }
      float v;
      std::memcpy(&v, b, 4);
      return static_cast<double>(v);
    }
  }
  throw NiftiError("unreachable datatype");
}

struct LoadedFile {
  ParsedHeader hdr;
  Grid grid;  // [nx, ny, nz]
};

LoadedFile load(const std::string& path) {
  std::vector<uint8_t> buf = read_file_bytes(path);
  if (has_gzip_magic(buf)) buf = gunzip(buf);
  ParsedHeader h = parse_header(buf);

  const int64_t nvox = h.nx * h.ny * h.nz;
  const int64_t bytes_per = h.bitpix / 8;

  const std::vector<uint8_t>* data_buf = &buf;
  std::vector<uint8_t> img_bytes;
  if (std::memcmp(h.magic, "ni1", 4) == 0) {
    std::filesystem::path img(path);
    img.replace_extension(".img");
    img_bytes = read_file_bytes(img.string());
    if (has_gzip_magic(img_bytes)) img_bytes = gunzip(img_bytes);
    data_buf = &img_bytes;
  }

  const int64_t need = h.vox_offset + nvox * bytes_per;
  if (static_cast<int64_t>(data_buf->size()) < need)
    throw NiftiError("truncated voxel data: need " + std::to_string(need) + " bytes",
                     static_cast<int64_t>(data_buf->size()));

  const double slope = h.slope == 0.0 ? 1.0 : h.slope;
  const double inter = h.slope == 0.0 ? 0.0 : h.inter;

  Grid g({h.nx, h.ny, h.nz});
  const uint8_t* base = data_buf->data() + h.vox_offset;
  // file order: x fastest, then y, then z
  int64_t idx = 0;
  for (int64_t z = 0; z < h.nz; ++z)
    for (int64_t y = 0; y < h.ny; ++y)
      for (int64_t x = 0; x < h.nx; ++x, ++idx) {
        const double v = decode_voxel(base + idx * bytes_per, h.dtype, h.swapped) * slope + inter;
        if (!std::isfinite(v))
          throw NiftiError("non-finite voxel value at linear index " + std::to_string(idx),
                           h.vox_offset + idx * bytes_per);
        g.at(x, y, z) = v;
      }
  return {h, std::move(g)};
}

void put_i32(std::vector<uint8_t>& b, int64_t off, int32_t v) { std::memcpy(&b[static_cast<size_t>(off)], &v, 4); }
void put_i16(std::vector<uint8_t>& b, int64_t off, int16_t v) { std::memcpy(&b[static_cast<size_t>(off)], &v, 2); }
void put_f32(std::vector<uint8_t>& b, int64_t off, float v) { std::memcpy(&b[static_cast<size_t>(off)], &v, 4); }

std::vector<uint8_t> build_file(const Grid& g, const std::array<double, 3>& spacing,
                                const std::array<double, 3>& origin,
                                const OrientationPassThrough& orient, NiftiDatatype dtype) {
  if (g.ndim() != 3)
    throw std::invalid_argument("write_volume: grid must be rank 3, got " +
                                shape_to_string(g.shape));
  for (double s : spacing)
    if (!(s > 0.0)) throw std::invalid_argument("write_volume: spacing must be > 0");
  const int bitpix = dtype == NiftiDatatype::Uint8 ? 8 : (dtype == NiftiDatatype::Int16 ? 16 : 32);
  const int64_t nvox = g.numel();
  const int64_t vox_offset = 352;

  std::vector<uint8_t> out(static_cast<size_t>(vox_offset + nvox * (bitpix / 8)), 0);
  put_i32(out, 0, 348);
  put_i16(out, 40, 3);
  put_i16(out, 42, static_cast<int16_t>(g.shape[0]));
  put_i16(out, 44, static_cast<int16_t>(g.shape[1]));
  put_i16(out, 46, static_cast<int16_t>(g.shape[2]));
  for (int i = 4; i <= 7; ++i) put_i16(out, 40 + 2 * i, 1);
  put_i16(out, 70, static_cast<int16_t>(dtype));
  put_i16(out, 72, static_cast<int16_t>(bitpix));
  put_f32(out, 76, 1.0f);  // qfac
  for (int i = 0; i < 3; ++i) put_f32(out, 76 + 4 * (i + 1), static_cast<float>(spacing[static_cast<size_t>(i)]));
  put_f32(out, 108, static_cast<float>(vox_offset));
  put_f32(out, 112, 0.0f);  // slope 0: stored values are verbatim
  put_f32(out, 116, 0.0f);
  put_i16(out, 252, orient.qform_code);
  put_i16(out, 254, orient.sform_code);
  for (int i = 0; i < 3; ++i) put_f32(out, 256 + 4 * i, orient.quatern[static_cast<size_t>(i)]);
  put_f32(out, 268, static_cast<float>(origin[0]));
  put_f32(out, 272, static_cast<float>(origin[1]));
  put_f32(out, 276, static_cast<float>(origin[2]));
  for (int i = 0; i < 12; ++i) put_f32(out, 280 + 4 * i, orient.srow[static_cast<size_t>(i)]);
  std::memcpy(&out[344], "n+1", 4);

  uint8_t* base = out.data() + vox_offset;
  int64_t idx = 0;
  const int64_t nx = g.shape[0], ny = g.shape[1], nz = g.shape[2];
  for (int64_t z = 0; z < nz; ++z)
    for (int64_t y = 0; y < ny; ++y)
      for (int64_t x = 0; x < nx; ++x, ++idx) {
        const double v = g.at(x, y, z);
        if (!std::isfinite(v))
          throw std::invalid_argument("write_volume: non-finite voxel at index " +
                                      std::to_string(idx));
        switch (dtype) {
          case NiftiDatatype::Uint8: {
            if (v != std::floor(v) || v < 0.0 || v > 255.0)
              throw std::invalid_argument("write_volume: value " + std::to_string(v) +
                                          " not representable as uint8");
            base[idx] = static_cast<uint8_t>(v);
            break;
          }
          case NiftiDatatype::Int16: {
            if (v != std::floor(v) || v < -32768.0 || v > 32767.0)
              throw std::invalid_argument("write_volume: value " + std::to_string(v) +
                                          " not representable as int16");
            const int16_t s = static_cast<int16_t>(v);
            std::memcpy(base + idx * 2, &s, 2);
            break;
          }
          case NiftiDatatype::Float32: {
            const float f = static_cast<float>(v);
            std::memcpy(base + idx * 4, &f, 4);
            break;
          }
        }
      }
  return out;
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NiftiError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw NiftiError("I/O failure writing " + path);
}

bool ends_with_gz(const std::string& path) {
  return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

}  // namespace

Volume read_volume(const std::string& path) {
  LoadedFile f = load(path);
  Volume v;
  v.grid = std::move(f.grid);
  v.spacing = {f.hdr.spacing[0], f.hdr.spacing[1], f.hdr.spacing[2]};
  v.origin = f.hdr.origin;
  v.orient = f.hdr.orient;
  return v;
}

Grid map_labels(const Grid& raw, const std::map<int, int>& mapping) {
  for (const auto& [from, to] : mapping) {
    (void)from;
    if (to < 0 || to > 2)
      throw std::invalid_argument("map_labels: mapping target " + std::to_string(to) +
                                  " outside {0,1,2}");
  }
  Grid out(raw.shape);
  for (int64_t i = 0; i < raw.numel(); ++i) {
    const double v = raw[i];
    if (v != std::floor(v) || std::abs(v) > 1e9)
      throw std::invalid_argument("map_labels: non-integer raw label value " + std::to_string(v));
    const int iv = static_cast<int>(v);
    auto it = mapping.find(iv);
    if (it == mapping.end())
      throw std::invalid_argument("map_labels: raw label value " + std::to_string(iv) +
                                  " missing from mapping");
    out[i] = static_cast<double>(it->second);
  }
  return out;
}

LabelMap read_labels(const std::string& path, const std::map<int, int>& mapping) {
  LoadedFile f = load(path);
  LabelMap l;
  l.grid = map_labels(f.grid, mapping);
  l.spacing = {f.hdr.spacing[0], f.hdr.spacing[1], f.hdr.spacing[2]};
  l.origin = f.hdr.origin;
  l.orient = f.hdr.orient;
  return l;
}

void write_volume(const Volume& v, const std::string& path, NiftiDatatype dtype) {
  auto bytes = build_file(v.grid, v.spacing, v.origin, v.orient, dtype);
  if (ends_with_gz(path)) bytes = gzip_bytes(bytes);
  write_bytes(path, bytes);
}

void write_labels(const LabelMap& l, const std::string& path) {
  auto bytes = build_file(l.grid, l.spacing, l.origin, l.orient, NiftiDatatype::Uint8);
  if (ends_with_gz(path)) bytes = gzip_bytes(bytes);
  write_bytes(path, bytes);
}

Volume normalize_intensity(const Volume& v) {
  Volume out = v;
  const double lo = min_value(v.grid);
  const double hi = max_value(v.grid);
  if (hi == lo) {
    std::fill(out.grid.data.begin(), out.grid.data.end(), 0.0);
    return out;
  }
  const double range = hi - lo;
  for (auto& x : out.grid.data) x = (x - lo) / range;  // division keeps extrema exactly 0 and 1
  return out;
}

}  // namespace pnidiff
