#include "a3l/codec.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace a3l {

namespace gf256 {

namespace {

struct Tables {
  std::array<std::uint8_t, 512> exp{};
  std::array<int, 256> log{};

  Tables() {
    // Primitive polynomial x^8 + x^4 + x^3 + x^2 + 1.
    unsigned x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = static_cast<std::uint8_t>(x);
      log[x] = i;
      x <<= 1;
      if (x & 0x100) x ^= 0x11d;
    }
    for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
    log[0] = -1;
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

std::uint8_t mul(std::uint8_t a, std::uint8_t b) {
  if (a == 0 || b == 0) return 0;
  const auto& t = tables();
  return t.exp[t.log[a] + t.log[b]];
}

std::uint8_t inv(std::uint8_t a) {
  if (a == 0) throw std::domain_error("zero has no inverse in GF(256)");
  const auto& t = tables();
  return t.exp[255 - t.log[a]];
}

std::uint8_t pow(std::uint8_t a, unsigned e) {
  if (e == 0) return 1;
  if (a == 0) return 0;
  const auto& t = tables();
  return t.exp[(static_cast<unsigned>(t.log[a]) * e) % 255];
}

}  // namespace gf256

namespace {

using Matrix = std::vector<std::uint8_t>;

// Gauss-Jordan inversion of a size x size matrix in place. Throws when singular.
Matrix invert(Matrix m, int size) {
  Matrix out(static_cast<std::size_t>(size) * size, 0);
  for (int i = 0; i < size; ++i) out[i * size + i] = 1;

  for (int col = 0; col < size; ++col) {
    int pivot = col;
    while (pivot < size && m[pivot * size + col] == 0) ++pivot;
    if (pivot == size) throw std::domain_error("singular matrix over GF(256)");
    if (pivot != col) {
      for (int j = 0; j < size; ++j) {
        std::swap(m[pivot * size + j], m[col * size + j]);
        std::swap(out[pivot * size + j], out[col * size + j]);
      }
    }
    const std::uint8_t scale = gf256::inv(m[col * size + col]);
    for (int j = 0; j < size; ++j) {
      m[col * size + j] = gf256::mul(m[col * size + j], scale);
      out[col * size + j] = gf256::mul(out[col * size + j], scale);
    }
    for (int row = 0; row < size; ++row) {
      const std::uint8_t f = m[row * size + col];
      if (row == col || f == 0) continue;
      for (int j = 0; j < size; ++j) {
        m[row * size + j] ^= gf256::mul(f, m[col * size + j]);
        out[row * size + j] ^= gf256::mul(f, out[col * size + j]);
      }
    }
  }
  return out;
}

// dst ^= coeff * src
void mul_add(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src, std::uint8_t coeff) {
  if (coeff == 0) return;
  if (coeff == 1) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] ^= src[i];
    return;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] ^= gf256::mul(coeff, src[i]);
}

}  // namespace

MdsCodec::MdsCodec(const CodingParams& params) : params_(params) {
  params_.validate();
  const int k = params_.k;
  const int n = params_.n;

  Matrix vandermonde(static_cast<std::size_t>(n) * k);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < k; ++c) {
      vandermonde[r * k + c] = gf256::pow(static_cast<std::uint8_t>(r), static_cast<unsigned>(c));
    }
  }
  const Matrix top_inv = invert(Matrix(vandermonde.begin(), vandermonde.begin() + k * k), k);

  generator_.assign(static_cast<std::size_t>(n) * k, 0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < k; ++c) {
      std::uint8_t acc = 0;
      for (int j = 0; j < k; ++j) acc ^= gf256::mul(vandermonde[r * k + j], top_inv[j * k + c]);
      generator_[r * k + c] = acc;
    }
  }
}

std::vector<Chunk> MdsCodec::encode(const Sample& sample) const {
  if (sample.payload.size() != params_.sample_bytes) {
    throw InputError("sample payload is " + std::to_string(sample.payload.size()) +
                     " bytes, expected " + std::to_string(params_.sample_bytes));
  }
  const std::size_t cb = params_.chunk_bytes();
  Bytes padded = sample.payload;
  padded.resize(params_.padded_bytes(), 0);

  std::vector<Chunk> chunks(params_.n);
  for (int i = 0; i < params_.n; ++i) {
    Chunk& c = chunks[i];
    c.sample_id = sample.id;
    c.chunk_index = i;
    c.gen_time = sample.gen_time;
    c.payload.assign(cb, 0);
    for (int j = 0; j < params_.k; ++j) {
      mul_add(c.payload, std::span<const std::uint8_t>(padded).subspan(j * cb, cb), gen(i, j));
    }
  }
  return chunks;
}

Bytes MdsCodec::decode(std::span<const Chunk> chunks) const {
  if (chunks.empty()) throw InsufficientChunksError("no chunks supplied");
  const int k = params_.k;
  const std::size_t cb = params_.chunk_bytes();
  const std::uint64_t id = chunks.front().sample_id;

  std::vector<const Chunk*> by_index(params_.n, nullptr);
  int distinct = 0;
  for (const Chunk& c : chunks) {
    if (c.sample_id != id) throw InputError("chunks belong to different samples");
    if (c.chunk_index < 0 || c.chunk_index >= params_.n) {
      throw InputError("chunk index " + std::to_string(c.chunk_index) + " out of range");
    }
    if (c.payload.size() != cb) throw InputError("chunk payload has wrong length");
    if (by_index[c.chunk_index] != nullptr) {
      throw InputError("duplicate chunk index " + std::to_string(c.chunk_index));
    }
    by_index[c.chunk_index] = &c;
    ++distinct;
  }
  if (distinct < k) {
    throw InsufficientChunksError("need " + std::to_string(k) + " distinct chunks, got " +
                                  std::to_string(distinct));
  }

  std::vector<const Chunk*> picked;
  picked.reserve(k);
  for (int i = 0; i < params_.n && static_cast<int>(picked.size()) < k; ++i) {
    if (by_index[i] != nullptr) picked.push_back(by_index[i]);
  }

  Bytes out(params_.padded_bytes(), 0);
  const bool systematic = picked.back()->chunk_index == k - 1;
  if (systematic) {
    for (int j = 0; j < k; ++j) {
      std::copy(picked[j]->payload.begin(), picked[j]->payload.end(), out.begin() + j * cb);
    }
  } else {
    Matrix sub(static_cast<std::size_t>(k) * k);
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < k; ++c) sub[r * k + c] = gen(picked[r]->chunk_index, c);
    }
    const Matrix sub_inv = invert(std::move(sub), k);
    for (int j = 0; j < k; ++j) {
      std::span<std::uint8_t> dst(out.data() + j * cb, cb);
      for (int r = 0; r < k; ++r) mul_add(dst, picked[r]->payload, sub_inv[j * k + r]);
    }
  }
  out.resize(params_.sample_bytes);
  return out;
}

std::vector<Chunk> encode_sample(const Sample& sample, const CodingParams& params) {
  return MdsCodec(params).encode(sample);
}

Bytes decode_sample(std::span<const Chunk> chunks, const CodingParams& params) {
  return MdsCodec(params).decode(chunks);
}

}  // namespace a3l
