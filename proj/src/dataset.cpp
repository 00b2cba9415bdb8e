// SPDX-License-Identifier: Apache-2.0
#include "autoprog/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "autoprog/ops.hpp"
#include "autoprog/rng.hpp"

namespace autoprog {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'D', 'S'};
constexpr std::size_t kHeaderBytes = 13;
constexpr std::uint64_t kTemplateTag = 0x7e3a11;
constexpr std::uint64_t kTrainTag = 0x51a7;
constexpr std::uint64_t kEvalTag = 0xe7a1;

struct SyntheticSpec {
  int classes, count, side;
  std::uint64_t seed;
};

SyntheticSpec parse_synthetic(const std::string& source) {
  std::string body = source.substr(std::string("synthetic").size());
  auto strip = [](std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; }),
            s.end());
    return s;
  };
  body = strip(body);
  if (body.size() < 2 || body.front() != '(' || body.back() != ')') {
    throw std::invalid_argument("dataset source \"" + source +
                                "\": expected synthetic(classes,count,side,seed)");
  }
  body = body.substr(1, body.size() - 2);
  std::vector<long> fields;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const std::size_t comma = body.find(',', pos);
    const std::string tok = body.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      fields.push_back(std::stol(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::invalid_argument("dataset source \"" + source + "\": bad field \"" + tok + "\"");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (fields.size() != 4) {
    throw std::invalid_argument("dataset source \"" + source +
                                "\": expected 4 fields (classes,count,side,seed)");
  }
  SyntheticSpec spec{static_cast<int>(fields[0]), static_cast<int>(fields[1]),
                     static_cast<int>(fields[2]), static_cast<std::uint64_t>(fields[3])};
  if (spec.classes < 2 || spec.count < spec.classes || spec.side < 4) {
    throw std::invalid_argument("dataset source \"" + source + "\": implausible dimensions");
  }
  return spec;
}

// Smooth per-class template: a coarse gaussian field bilinearly upsampled to
// full resolution. Amplitude and per-pixel noise are balanced so a toy model
// needs a few dozen epochs to plateau instead of memorizing instantly.
constexpr float kTemplateAmplitude = 0.55f;
constexpr float kPixelNoise = 1.3f;

std::vector<float> make_template(int side, Rng& rng) {
  constexpr int kCoarse = 6;
  Tensor coarse = Tensor::zeros({1, kCoarse, kCoarse, 3});
  for (float& v : coarse.data()) {
    v = static_cast<float>(rng.normal(0.0, kTemplateAmplitude));
  }
  NoGradGuard ng;
  Tensor full = ops::resize_bilinear(coarse, side, side);
  return full.data();
}

void fill_split(Split& split, const SyntheticSpec& spec, int count, std::uint64_t tag) {
  split.side = spec.side;
  split.classes = spec.classes;
  split.labels.resize(static_cast<std::size_t>(count));
  split.pixels.resize(static_cast<std::size_t>(count) * split.image_floats());

  std::vector<std::vector<float>> templates;
  Rng tmpl_rng(mix_seed(spec.seed, kTemplateTag));
  templates.reserve(static_cast<std::size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) templates.push_back(make_template(spec.side, tmpl_rng));

  const int side = spec.side;
  for (int i = 0; i < count; ++i) {
    const int label = i % spec.classes;
    split.labels[static_cast<std::size_t>(i)] = label;
    Rng rng(mix_seed(mix_seed(spec.seed, tag), static_cast<std::uint64_t>(i)));
    const int dy = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(side)));
    const int dx = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(side)));
    const float brightness = static_cast<float>(0.75 + 0.5 * rng.uniform01());
    const std::vector<float>& tmpl = templates[static_cast<std::size_t>(label)];
    float* img = split.pixels.data() + static_cast<std::size_t>(i) * split.image_floats();
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const int sy = (y + dy) % side;
        const int sx = (x + dx) % side;
        for (int c = 0; c < 3; ++c) {
          const float noise = static_cast<float>(rng.normal(0.0, kPixelNoise));
          img[(static_cast<std::size_t>(y) * side + x) * 3 + c] =
              brightness * tmpl[(static_cast<std::size_t>(sy) * side + sx) * 3 + c] + noise;
        }
      }
    }
  }
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  Dataset ds;
  fill_split(ds.train, spec, spec.count, kTrainTag);
  fill_split(ds.eval, spec, std::max(spec.classes, spec.count / 5), kEvalTag);
  return ds;
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

Tensor Split::gather(const std::vector<int>& indices) const {
  Tensor batch = Tensor::zeros({static_cast<int>(indices.size()), side, side, 3});
  const std::size_t per = image_floats();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= count()) {
      throw std::out_of_range("Split::gather: index " + std::to_string(idx) + " out of range");
    }
    std::memcpy(batch.data().data() + i * per,
                pixels.data() + static_cast<std::size_t>(idx) * per, per * sizeof(float));
  }
  return batch;
}

std::vector<int> Split::gather_labels(const std::vector<int>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (int idx : indices) out.push_back(labels[static_cast<std::size_t>(idx)]);
  return out;
}

Dataset ingest_dataset(const std::string& source) {
  if (source.starts_with("synthetic")) {
    return make_synthetic(parse_synthetic(source));
  }
  Dataset ds;
  ds.train = load_split(source + "/train.bin");
  ds.eval = load_split(source + "/eval.bin");
  if (ds.train.side != ds.eval.side || ds.train.classes != ds.eval.classes) {
    throw std::runtime_error("dataset " + source + ": train and eval headers disagree");
  }
  return ds;
}

void save_split(const std::string& path, const Split& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open dataset file for writing: " + path);
  unsigned char header[kHeaderBytes];
  std::memcpy(header, kMagic, 4);
  header[4] = 1;  // version
  header[5] = 3;  // channels
  header[6] = static_cast<unsigned char>(split.side & 0xff);
  header[7] = static_cast<unsigned char>((split.side >> 8) & 0xff);
  const std::uint32_t count = static_cast<std::uint32_t>(split.count());
  header[8] = static_cast<unsigned char>(count & 0xff);
  header[9] = static_cast<unsigned char>((count >> 8) & 0xff);
  header[10] = static_cast<unsigned char>((count >> 16) & 0xff);
  header[11] = static_cast<unsigned char>((count >> 24) & 0xff);
  header[12] = static_cast<unsigned char>(split.classes);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<unsigned char> record(1 + split.image_floats());
  for (int i = 0; i < split.count(); ++i) {
    record[0] = static_cast<unsigned char>(split.labels[static_cast<std::size_t>(i)]);
    const float* img = split.pixels.data() + static_cast<std::size_t>(i) * split.image_floats();
    for (std::size_t p = 0; p < split.image_floats(); ++p) {
      const float denorm = (img[p] * kPixelStd + kPixelMean) * 255.0f;
      record[1 + p] = static_cast<unsigned char>(std::clamp(std::lround(denorm), 0L, 255L));
    }
    out.write(reinterpret_cast<const char*>(record.data()),
              static_cast<std::streamsize>(record.size()));
  }
  if (!out) throw std::runtime_error("failed writing dataset file: " + path);
}

Split load_split(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes) {
    throw std::runtime_error(path + ": truncated header (" + std::to_string(bytes.size()) +
                             " bytes, need " + std::to_string(kHeaderBytes) + ")");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw std::runtime_error(path + ": bad magic, not an APDS container");
  }
  if (bytes[4] != 1) {
    throw std::runtime_error(path + ": unsupported APDS version " + std::to_string(bytes[4]));
  }
  if (bytes[5] != 3) {
    throw std::runtime_error(path + ": unsupported channel count " + std::to_string(bytes[5]));
  }
  Split split;
  split.side = read_u16(bytes.data() + 6);
  const std::uint32_t count = read_u32(bytes.data() + 8);
  split.classes = bytes[12];
  if (split.side < 1 || split.classes < 2) {
    throw std::runtime_error(path + ": implausible header (side " + std::to_string(split.side) +
                             ", classes " + std::to_string(split.classes) + ")");
  }
  const std::size_t record_bytes = 1 + split.image_floats();
  const std::size_t payload = bytes.size() - kHeaderBytes;
  if (payload != record_bytes * count) {
    const std::size_t complete = payload / record_bytes;
    throw std::runtime_error(path + ": truncated at record " + std::to_string(complete) +
                             " (byte offset " +
                             std::to_string(kHeaderBytes + complete * record_bytes) + ", header " +
                             "promises " + std::to_string(count) + " records)");
  }
  split.labels.resize(count);
  split.pixels.resize(count * split.image_floats());
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const unsigned char label = p[0];
    if (label >= split.classes) {
      throw std::runtime_error(path + ": record " + std::to_string(i) + " (byte offset " +
                               std::to_string(kHeaderBytes + i * record_bytes) + ") has label " +
                               std::to_string(label) + " >= " + std::to_string(split.classes));
    }
    split.labels[i] = label;
    float* img = split.pixels.data() + static_cast<std::size_t>(i) * split.image_floats();
    for (std::size_t j = 0; j < split.image_floats(); ++j) {
      img[j] = (static_cast<float>(p[1 + j]) / 255.0f - kPixelMean) / kPixelStd;
    }
    p += record_bytes;
  }
  return split;
}

}  // namespace autoprog
