#include "ctphase/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "ctphase/errors.hpp"

namespace ctphase {
namespace {

// NIfTI-1 datatype codes.
enum : std::int16_t {
  kDtUint8 = 2,
  kDtInt16 = 4,
  kDtInt32 = 8,
  kDtFloat32 = 16,
  kDtFloat64 = 64,
  kDtInt8 = 256,
  kDtUint16 = 512,
  kDtUint32 = 768,
};

#pragma pack(push, 1)
struct NiftiHeader {
  std::int32_t sizeof_hdr;    //   0
  char data_type[10];         //   4
  char db_name[18];           //  14
  std::int32_t extents;       //  32
  std::int16_t session_error; //  36
  char regular;               //  38
  char dim_info;              //  39
  std::int16_t dim[8];        //  40
  float intent_p1;            //  56
  float intent_p2;            //  60
  float intent_p3;            //  64
  std::int16_t intent_code;   //  68
  std::int16_t datatype;      //  70
  std::int16_t bitpix;        //  72
  std::int16_t slice_start;   //  74
  float pixdim[8];            //  76
  float vox_offset;           // 108
  float scl_slope;            // 112
  float scl_inter;            // 116
  std::int16_t slice_end;     // 120
  char slice_code;            // 122
  char xyzt_units;            // 123
  float cal_max;              // 124
  float cal_min;              // 128
  float slice_duration;       // 132
  float toffset;              // 136
  std::int32_t glmax;         // 140
  std::int32_t glmin;         // 144
  char descrip[80];           // 148
  char aux_file[24];          // 228
  std::int16_t qform_code;    // 252
  std::int16_t sform_code;    // 254
  float quatern_b;            // 256
  float quatern_c;            // 260
  float quatern_d;            // 264
  float qoffset_x;            // 268
  float qoffset_y;            // 272
  float qoffset_z;            // 276
  float srow_x[4];            // 280
  float srow_y[4];            // 296
  float srow_z[4];            // 312
  char intent_name[16];       // 328
  char magic[4];              // 344
};
#pragma pack(pop)
static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must be 348 bytes");

void swap16(void* p) {
  auto* b = static_cast<std::uint8_t*>(p);
  std::swap(b[0], b[1]);
}

void swap32(void* p) {
  auto* b = static_cast<std::uint8_t*>(p);
  std::swap(b[0], b[3]);
  std::swap(b[1], b[2]);
}

void swap_header(NiftiHeader& h) {
  swap32(&h.sizeof_hdr);
  swap32(&h.extents);
  swap16(&h.session_error);
  for (auto& d : h.dim) swap16(&d);
  swap32(&h.intent_p1);
  swap32(&h.intent_p2);
  swap32(&h.intent_p3);
  swap16(&h.intent_code);
  swap16(&h.datatype);
  swap16(&h.bitpix);
  swap16(&h.slice_start);
  for (auto& p : h.pixdim) swap32(&p);
  swap32(&h.vox_offset);
  swap32(&h.scl_slope);
  swap32(&h.scl_inter);
  swap16(&h.slice_end);
  swap32(&h.cal_max);
  swap32(&h.cal_min);
  swap32(&h.slice_duration);
  swap32(&h.toffset);
  swap32(&h.glmax);
  swap32(&h.glmin);
  swap16(&h.qform_code);
  swap16(&h.sform_code);
  swap32(&h.quatern_b);
  swap32(&h.quatern_c);
  swap32(&h.quatern_d);
  swap32(&h.qoffset_x);
  swap32(&h.qoffset_y);
  swap32(&h.qoffset_z);
  for (auto& v : h.srow_x) swap32(&v);
  for (auto& v : h.srow_y) swap32(&v);
  for (auto& v : h.srow_z) swap32(&v);
}

bool is_gzip(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  unsigned char magic[2] = {0, 0};
  in.read(reinterpret_cast<char*>(magic), 2);
  return in.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
}

std::vector<std::uint8_t> read_all_bytes(const std::string& path) {
  if (is_gzip(path)) {
    gzFile gz = gzopen(path.c_str(), "rb");
    if (gz == nullptr) throw DataError("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes;
    std::uint8_t chunk[1 << 16];
    int n = 0;
    while ((n = gzread(gz, chunk, sizeof(chunk))) > 0) {
      bytes.insert(bytes.end(), chunk, chunk + n);
    }
    const bool error = n < 0;
    gzclose(gz);
    if (error) throw DataError("gzip read failed for '" + path + "'");
    return bytes;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

struct RawImage {
  NiftiHeader header;
  bool swapped = false;
  Dims dims{0, 0, 0};
  Spacing spacing{1.0, 1.0, 1.0};
  std::size_t n_voxels = 0;
  const std::uint8_t* payload = nullptr;  // into the bytes buffer
  std::vector<std::uint8_t> bytes;
};

RawImage read_raw(const std::string& path) {
  RawImage img;
  img.bytes = read_all_bytes(path);
  if (img.bytes.size() < sizeof(NiftiHeader)) {
    throw DataError("'" + path + "' is not a NIfTI-1 file (too short)");
  }
  std::memcpy(&img.header, img.bytes.data(), sizeof(NiftiHeader));
  NiftiHeader& h = img.header;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    img.swapped = true;
    if (h.sizeof_hdr != 348) {
      throw DataError("'" + path + "' is not a NIfTI-1 file (bad sizeof_hdr)");
    }
  }
  if (std::memcmp(h.magic, "n+1", 3) != 0) {
    if (std::memcmp(h.magic, "ni1", 3) == 0) {
      throw DataError("'" + path + "': two-file NIfTI-1 (.hdr/.img) is not supported");
    }
    throw DataError("'" + path + "' is not a NIfTI-1 file (bad magic)");
  }
  if (h.dim[0] < 1 || h.dim[0] > 7) {
    throw DataError("'" + path + "': invalid dim[0]");
  }
  // Trailing singleton dims are tolerated; anything else is not a volume.
  if (h.dim[0] < 3) {
    throw DataError("'" + path + "': image is not 3-dimensional");
  }
  for (int d = 4; d <= h.dim[0]; ++d) {
    if (h.dim[d] > 1) {
      throw DataError("'" + path + "': image is not 3-dimensional");
    }
  }
  for (int d = 1; d <= 3; ++d) {
    if (h.dim[d] < 1) throw DataError("'" + path + "': non-positive dimension");
    img.dims[d - 1] = h.dim[d];
    if (!(h.pixdim[d] > 0.0f)) {
      throw DataError("'" + path + "': non-positive voxel spacing");
    }
    img.spacing[d - 1] = h.pixdim[d];
  }
  img.n_voxels = static_cast<std::size_t>(img.dims[0]) * img.dims[1] * img.dims[2];

  const double offset = h.vox_offset;
  if (offset < 348 || offset != std::floor(offset)) {
    throw DataError("'" + path + "': bad vox_offset");
  }
  const std::size_t bytes_per_voxel = static_cast<std::size_t>(h.bitpix) / 8;
  const std::size_t need = static_cast<std::size_t>(offset) + img.n_voxels * bytes_per_voxel;
  if (img.bytes.size() < need) {
    throw DataError("'" + path + "': truncated payload");
  }
  img.payload = img.bytes.data() + static_cast<std::size_t>(offset);
  return img;
}

template <typename T>
T load_scalar(const std::uint8_t* p, bool swapped) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swapped) {
    if constexpr (sizeof(T) == 2) {
      swap16(&v);
    } else if constexpr (sizeof(T) == 4) {
      swap32(&v);
    }
  }
  return v;
}

template <typename T, typename Out, typename Fn>
void decode_payload(const RawImage& img, std::vector<Out>& out, Fn&& convert) {
  out.resize(img.n_voxels);
  const std::uint8_t* p = img.payload;
  for (std::size_t i = 0; i < img.n_voxels; ++i, p += sizeof(T)) {
    if constexpr (sizeof(T) == 8) {
      // float64: swap as two words.
      std::uint8_t buf[8];
      std::memcpy(buf, p, 8);
      if (img.swapped) {
        for (int b = 0; b < 4; ++b) std::swap(buf[b], buf[7 - b]);
      }
      T v;
      std::memcpy(&v, buf, 8);
      out[i] = convert(v);
    } else {
      out[i] = convert(load_scalar<T>(p, img.swapped));
    }
  }
}

bool integer_datatype(std::int16_t dt) {
  return dt == kDtUint8 || dt == kDtInt8 || dt == kDtInt16 || dt == kDtUint16 ||
         dt == kDtInt32 || dt == kDtUint32;
}

NiftiHeader make_header(const Dims& dims, const Spacing& spacing, std::int16_t datatype,
                        std::int16_t bitpix) {
  NiftiHeader h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  for (int d = 0; d < 3; ++d) h.dim[d + 1] = static_cast<std::int16_t>(dims[d]);
  for (int d = 4; d < 8; ++d) h.dim[d] = 1;
  h.datatype = datatype;
  h.bitpix = bitpix;
  h.pixdim[0] = 1.0f;
  for (int d = 0; d < 3; ++d) h.pixdim[d + 1] = static_cast<float>(spacing[d]);
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

void write_bytes(const std::string& path, const std::uint8_t* data, std::size_t size) {
  const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  if (gz) {
    gzFile out = gzopen(path.c_str(), "wb");
    if (out == nullptr) throw DataError("cannot write '" + path + "'");
    std::size_t written = 0;
    while (written < size) {
      const unsigned chunk =
          static_cast<unsigned>(std::min<std::size_t>(size - written, 1u << 28));
      if (gzwrite(out, data + written, chunk) != static_cast<int>(chunk)) {
        gzclose(out);
        throw DataError("gzip write failed for '" + path + "'");
      }
      written += chunk;
    }
    if (gzclose(out) != Z_OK) throw DataError("gzip close failed for '" + path + "'");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw DataError("write failed for '" + path + "'");
}

template <typename T>
void save_image(const std::string& path, const Dims& dims, const Spacing& spacing,
                std::int16_t datatype, const std::vector<T>& values) {
  for (int d = 0; d < 3; ++d) {
    if (dims[d] < 1) throw DataError("cannot save image with non-positive dims");
    if (!(spacing[d] > 0.0)) throw DataError("cannot save image with non-positive spacing");
  }
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (values.size() != n) throw DataError("value count does not match dims");

  const NiftiHeader h = make_header(dims, spacing, datatype, sizeof(T) * 8);
  std::vector<std::uint8_t> bytes(352 + n * sizeof(T), 0);
  std::memcpy(bytes.data(), &h, sizeof(h));
  // 348..351 stay zero: no header extensions.
  std::memcpy(bytes.data() + 352, values.data(), n * sizeof(T));
  write_bytes(path, bytes.data(), bytes.size());
}

}  // namespace

Volume3D load_volume(const std::string& path) {
  const RawImage img = read_raw(path);
  const NiftiHeader& h = img.header;

  // slope 0 means "no rescale" per the format.
  const double slope = (h.scl_slope == 0.0f) ? 1.0 : static_cast<double>(h.scl_slope);
  const double inter = (h.scl_slope == 0.0f) ? 0.0 : static_cast<double>(h.scl_inter);
  auto to_hu = [slope, inter](auto raw) {
    return static_cast<float>(static_cast<double>(raw) * slope + inter);
  };

  Volume3D v;
  v.dims = img.dims;
  v.spacing = img.spacing;
  switch (h.datatype) {
    case kDtUint8:
      decode_payload<std::uint8_t>(img, v.values, to_hu);
      break;
    case kDtInt8:
      decode_payload<std::int8_t>(img, v.values, to_hu);
      break;
    case kDtInt16:
      decode_payload<std::int16_t>(img, v.values, to_hu);
      break;
    case kDtUint16:
      decode_payload<std::uint16_t>(img, v.values, to_hu);
      break;
    case kDtInt32:
      decode_payload<std::int32_t>(img, v.values, to_hu);
      break;
    case kDtUint32:
      decode_payload<std::uint32_t>(img, v.values, to_hu);
      break;
    case kDtFloat32:
      decode_payload<float>(img, v.values, to_hu);
      break;
    case kDtFloat64:
      decode_payload<double>(img, v.values, to_hu);
      break;
    default:
      throw DataError("'" + path + "': unsupported NIfTI datatype " +
                      std::to_string(h.datatype));
  }
  return v;
}

LabelMap load_labelmap(const std::string& path) {
  const RawImage img = read_raw(path);
  const NiftiHeader& h = img.header;
  if (!integer_datatype(h.datatype)) {
    throw DataError("'" + path + "': label map payload must be an integer type");
  }
  if (!(h.scl_slope == 0.0f || (h.scl_slope == 1.0f && h.scl_inter == 0.0f))) {
    throw DataError("'" + path + "': label map must not carry an intensity rescale");
  }

  LabelMap m;
  m.dims = img.dims;
  m.spacing = img.spacing;
  auto identity = [](auto raw) { return static_cast<std::int32_t>(raw); };
  switch (h.datatype) {
    case kDtUint8:
      decode_payload<std::uint8_t>(img, m.labels, identity);
      break;
    case kDtInt8:
      decode_payload<std::int8_t>(img, m.labels, identity);
      break;
    case kDtInt16:
      decode_payload<std::int16_t>(img, m.labels, identity);
      break;
    case kDtUint16:
      decode_payload<std::uint16_t>(img, m.labels, identity);
      break;
    case kDtInt32:
      decode_payload<std::int32_t>(img, m.labels, identity);
      break;
    case kDtUint32:
      decode_payload<std::uint32_t>(img, m.labels, identity);
      break;
    default:
      throw DataError("'" + path + "': unsupported NIfTI datatype " +
                      std::to_string(h.datatype));
  }
  return m;
}

void save_volume(const Volume3D& volume, const std::string& path) {
  save_image(path, volume.dims, volume.spacing, kDtFloat32, volume.values);
}

void save_labelmap(const LabelMap& mask, const std::string& path) {
  save_image(path, mask.dims, mask.spacing, kDtInt32, mask.labels);
}

void check_grid(const Volume3D& volume, const LabelMap& mask) {
  if (volume.dims != mask.dims) {
    throw DataError("volume grid (" + std::to_string(volume.dims[0]) + "," +
                    std::to_string(volume.dims[1]) + "," + std::to_string(volume.dims[2]) +
                    ") does not match mask grid (" + std::to_string(mask.dims[0]) + "," +
                    std::to_string(mask.dims[1]) + "," + std::to_string(mask.dims[2]) +
                    "); masks must be produced on the input grid");
  }
}

}  // namespace ctphase
