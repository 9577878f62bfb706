#include "petprior/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <vector>

namespace petprior {
namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax;
  std::int32_t glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348);

constexpr std::int16_t kUint8 = 2;
constexpr std::int16_t kInt16 = 4;
constexpr std::int16_t kInt32 = 8;
constexpr std::int16_t kFloat32 = 16;
constexpr std::int16_t kFloat64 = 64;
constexpr std::int16_t kInt8 = 256;
constexpr std::int16_t kUint16 = 512;
constexpr std::int16_t kUint32 = 768;

struct GzCloser {
  void operator()(gzFile_s* f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

template <typename T>
T byteswapped(T v) {
  auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

template <typename T, std::size_t N>
void swap_all(T (&arr)[N]) {
  for (auto& v : arr) v = byteswapped(v);
}

void swap_header(Nifti1Header& h) {
  h.sizeof_hdr = byteswapped(h.sizeof_hdr);
  swap_all(h.dim);
  h.datatype = byteswapped(h.datatype);
  h.bitpix = byteswapped(h.bitpix);
  swap_all(h.pixdim);
  h.vox_offset = byteswapped(h.vox_offset);
  h.scl_slope = byteswapped(h.scl_slope);
  h.scl_inter = byteswapped(h.scl_inter);
  h.qform_code = byteswapped(h.qform_code);
  h.sform_code = byteswapped(h.sform_code);
  h.quatern_b = byteswapped(h.quatern_b);
  h.quatern_c = byteswapped(h.quatern_c);
  h.quatern_d = byteswapped(h.quatern_d);
  h.qoffset_x = byteswapped(h.qoffset_x);
  h.qoffset_y = byteswapped(h.qoffset_y);
  h.qoffset_z = byteswapped(h.qoffset_z);
  swap_all(h.srow_x);
  swap_all(h.srow_y);
  swap_all(h.srow_z);
}

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kUint8:
    case kInt8: return 1;
    case kInt16:
    case kUint16: return 2;
    case kInt32:
    case kUint32:
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

template <typename T>
void convert(const std::vector<unsigned char>& raw, bool swap, Eigen::ArrayXf& out) {
  const auto n = static_cast<Index>(raw.size() / sizeof(T));
  out.resize(n);
  for (Index i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, raw.data() + static_cast<std::size_t>(i) * sizeof(T), sizeof(T));
    if (swap) v = byteswapped(v);
    out[i] = static_cast<float>(v);
  }
}

/// Index-to-world affine (rotation/scale part and offset).
struct Affine {
  Eigen::Matrix3d linear;
  Eigen::Vector3d offset;
};

Affine header_affine(const Nifti1Header& h) {
  Affine a;
  if (h.sform_code > 0) {
    for (int j = 0; j < 3; ++j) {
      a.linear(0, j) = h.srow_x[j];
      a.linear(1, j) = h.srow_y[j];
      a.linear(2, j) = h.srow_z[j];
    }
    a.offset = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};
  } else if (h.qform_code > 0) {
    const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    const double a0 = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    Eigen::Matrix3d r;
    r << a0 * a0 + b * b - c * c - d * d, 2 * (b * c - a0 * d), 2 * (b * d + a0 * c),
        2 * (b * c + a0 * d), a0 * a0 + c * c - b * b - d * d, 2 * (c * d - a0 * b),
        2 * (b * d - a0 * c), 2 * (c * d + a0 * b), a0 * a0 + d * d - c * c - b * b;
    const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
    a.linear = r * Eigen::Vector3d(h.pixdim[1], h.pixdim[2], qfac * h.pixdim[3]).asDiagonal();
    a.offset = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
  } else {
    a.linear = Eigen::Vector3d(h.pixdim[1], h.pixdim[2], h.pixdim[3]).asDiagonal();
    a.offset.setZero();
  }
  return a;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Volume3D load_volume(const std::filesystem::path& path, Modality modality) {
  const std::string where = path.string();
  require(std::filesystem::is_regular_file(path), ErrorCode::kMissingFile,
          "missing file: " + where);
  GzHandle file(gzopen(where.c_str(), "rb"));
  require(file != nullptr, ErrorCode::kIo, "cannot open " + where);

  Nifti1Header h{};
  const int got = gzread(file.get(), &h, sizeof(h));
  require(got == static_cast<int>(sizeof(h)), ErrorCode::kCorruptHeader,
          "corrupt header (short read): " + where);
  bool swap = false;
  if (h.sizeof_hdr != 348) {
    swap = byteswapped(h.sizeof_hdr) == 348;
    require(swap, ErrorCode::kCorruptHeader, "corrupt header (sizeof_hdr): " + where);
    swap_header(h);
  }
  require(std::memcmp(h.magic, "n+1", 4) == 0 || std::memcmp(h.magic, "ni1", 4) == 0,
          ErrorCode::kCorruptHeader, "corrupt header (magic): " + where);
  require(std::memcmp(h.magic, "n+1", 4) == 0, ErrorCode::kCorruptHeader,
          "split .hdr/.img pairs are not supported: " + where);
  require(h.dim[0] >= 1 && h.dim[0] <= 7, ErrorCode::kCorruptHeader,
          "corrupt header (dim[0]): " + where);
  for (int i = 4; i <= h.dim[0]; ++i) {
    require(h.dim[i] <= 1, ErrorCode::kMultiChannel,
            "multi-channel volume not supported: " + where);
  }
  GridSize grid{h.dim[1], h.dim[0] >= 2 ? h.dim[2] : 1, h.dim[0] >= 3 ? h.dim[3] : 1};
  require(grid.nx > 0 && grid.ny > 0 && grid.nz > 0, ErrorCode::kCorruptHeader,
          "corrupt header (dimensions): " + where);
  const int bpv = bytes_per_voxel(h.datatype);
  require(bpv > 0, ErrorCode::kCorruptHeader,
          "unsupported datatype " + std::to_string(h.datatype) + ": " + where);
  require(h.vox_offset >= 348, ErrorCode::kCorruptHeader, "corrupt header (vox_offset): " + where);

  require(gzseek(file.get(), static_cast<z_off_t>(h.vox_offset), SEEK_SET) >= 0,
          ErrorCode::kCorruptHeader, "cannot seek to voxel data: " + where);
  std::vector<unsigned char> raw(static_cast<std::size_t>(grid.count()) * static_cast<std::size_t>(bpv));
  const int read = gzread(file.get(), raw.data(), static_cast<unsigned>(raw.size()));
  require(read == static_cast<int>(raw.size()), ErrorCode::kCorruptHeader,
          "truncated voxel data: " + where);

  Eigen::ArrayXf values;
  switch (h.datatype) {
    case kUint8: convert<std::uint8_t>(raw, swap, values); break;
    case kInt8: convert<std::int8_t>(raw, swap, values); break;
    case kInt16: convert<std::int16_t>(raw, swap, values); break;
    case kUint16: convert<std::uint16_t>(raw, swap, values); break;
    case kInt32: convert<std::int32_t>(raw, swap, values); break;
    case kUint32: convert<std::uint32_t>(raw, swap, values); break;
    case kFloat32: convert<float>(raw, swap, values); break;
    case kFloat64: convert<double>(raw, swap, values); break;
    default: break;
  }
  if (h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f)) {
    values = values * h.scl_slope + h.scl_inter;
  }

  // Closest-canonical reorientation: output axis j takes the input axis whose
  // affine column points most strongly along world axis j.
  const Affine affine = header_affine(h);
  std::array<int, 3> source_axis{-1, -1, -1};
  std::array<bool, 3> flip{};
  std::array<bool, 3> used{};
  Eigen::Matrix3d mag = affine.linear.cwiseAbs();
  for (int pass = 0; pass < 3; ++pass) {
    int best_i = -1, best_j = -1;
    double best = -1.0;
    for (int i = 0; i < 3; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      for (int j = 0; j < 3; ++j) {
        if (source_axis[static_cast<std::size_t>(j)] >= 0) continue;
        if (mag(j, i) > best) {
          best = mag(j, i);
          best_i = i;
          best_j = j;
        }
      }
    }
    used[static_cast<std::size_t>(best_i)] = true;
    source_axis[static_cast<std::size_t>(best_j)] = best_i;
    flip[static_cast<std::size_t>(best_j)] = affine.linear(best_j, best_i) < 0.0;
  }

  const std::array<Index, 3> in_dims{grid.nx, grid.ny, grid.nz};
  GridSize out_grid{in_dims[static_cast<std::size_t>(source_axis[0])],
                    in_dims[static_cast<std::size_t>(source_axis[1])],
                    in_dims[static_cast<std::size_t>(source_axis[2])]};
  Spacing spacing;
  Eigen::Vector3d start_index = Eigen::Vector3d::Zero();
  for (int j = 0; j < 3; ++j) {
    const int i = source_axis[static_cast<std::size_t>(j)];
    spacing[j] = affine.linear.col(i).norm();
    if (flip[static_cast<std::size_t>(j)]) start_index[i] = static_cast<double>(in_dims[static_cast<std::size_t>(i)] - 1);
  }
  const Origin origin = affine.offset + affine.linear * start_index;

  const bool identity = source_axis == std::array<int, 3>{0, 1, 2} && !flip[0] && !flip[1] && !flip[2];
  if (!identity) {
    Eigen::ArrayXf reordered(values.size());
    std::array<Index, 3> idx{};
    for (Index z = 0; z < out_grid.nz; ++z) {
      for (Index y = 0; y < out_grid.ny; ++y) {
        for (Index x = 0; x < out_grid.nx; ++x) {
          const std::array<Index, 3> out_idx{x, y, z};
          for (std::size_t j = 0; j < 3; ++j) {
            const auto i = static_cast<std::size_t>(source_axis[j]);
            idx[i] = flip[j] ? in_dims[i] - 1 - out_idx[j] : out_idx[j];
          }
          reordered[x + out_grid.nx * (y + out_grid.ny * z)] =
              values[idx[0] + grid.nx * (idx[1] + grid.ny * idx[2])];
        }
      }
    }
    values.swap(reordered);
  }
  return Volume3D(out_grid, spacing, origin, modality, std::move(values));
}

void save_volume(const Volume3D& vol, const std::filesystem::path& path) {
  vol.check_invariants();
  const std::string where = path.string();
  const auto parent = path.parent_path();
  require(parent.empty() || std::filesystem::is_directory(parent), ErrorCode::kIo,
          "unwritable path (no such directory): " + where);

  const bool label = vol.modality() == Modality::kLabel;
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<std::int16_t>(vol.grid().nx);
  h.dim[2] = static_cast<std::int16_t>(vol.grid().ny);
  h.dim[3] = static_cast<std::int16_t>(vol.grid().nz);
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.datatype = label ? kUint8 : kFloat32;
  h.bitpix = label ? 8 : 32;
  h.pixdim[0] = 1.0f;
  for (int i = 0; i < 3; ++i) h.pixdim[i + 1] = static_cast<float>(vol.spacing()[i]);
  for (int i = 4; i < 8; ++i) h.pixdim[i] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.xyzt_units = 2;  // mm
  const std::string descrip = "petprior " + std::string(to_string(vol.modality()));
  std::strncpy(h.descrip, descrip.c_str(), sizeof(h.descrip) - 1);
  h.qform_code = 1;
  h.sform_code = 1;
  h.qoffset_x = static_cast<float>(vol.origin()[0]);
  h.qoffset_y = static_cast<float>(vol.origin()[1]);
  h.qoffset_z = static_cast<float>(vol.origin()[2]);
  h.srow_x[0] = h.pixdim[1];
  h.srow_y[1] = h.pixdim[2];
  h.srow_z[2] = h.pixdim[3];
  h.srow_x[3] = h.qoffset_x;
  h.srow_y[3] = h.qoffset_y;
  h.srow_z[3] = h.qoffset_z;
  std::memcpy(h.magic, "n+1", 4);

  const std::string mode = has_suffix(where, ".gz") ? "wb1" : "wbT";
  GzHandle file(gzopen(where.c_str(), mode.c_str()));
  require(file != nullptr, ErrorCode::kIo, "unwritable path: " + where);
  const std::array<char, 4> extension{};
  bool ok = gzwrite(file.get(), &h, sizeof(h)) == static_cast<int>(sizeof(h));
  ok = ok && gzwrite(file.get(), extension.data(), 4) == 4;
  if (label) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(vol.data().size()));
    for (Index i = 0; i < vol.data().size(); ++i) bytes[static_cast<std::size_t>(i)] = vol.data()[i] > 0.5f ? 1 : 0;
    ok = ok && gzwrite(file.get(), bytes.data(), static_cast<unsigned>(bytes.size())) ==
                   static_cast<int>(bytes.size());
  } else {
    const auto nbytes = static_cast<unsigned>(vol.data().size() * sizeof(float));
    ok = ok && gzwrite(file.get(), vol.data().data(), nbytes) == static_cast<int>(nbytes);
  }
  require(ok, ErrorCode::kIo, "write failed: " + where);
  require(gzclose(file.release()) == Z_OK, ErrorCode::kIo, "write failed on close: " + where);
}

}  // namespace petprior
