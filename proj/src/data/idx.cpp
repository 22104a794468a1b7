// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/data/idx.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace efl::data {
namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw FormatError(path.string() + ": truncated header at offset " +
                      std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8)
    out.push_back(static_cast<char>((v >> shift) & 0xff));
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("failed writing " + path.string());
}

}  // namespace

Tensor load_idx_images(const std::filesystem::path& images_path) {
  const auto bytes = slurp(images_path);
  const std::uint32_t magic = read_be32(bytes, 0, images_path);
  if (magic != kIdxImageMagic) {
    throw FormatError(images_path.string() + ": bad image magic at offset 0");
  }
  const std::size_t n = read_be32(bytes, 4, images_path);
  const std::size_t rows = read_be32(bytes, 8, images_path);
  const std::size_t cols = read_be32(bytes, 12, images_path);
  const std::size_t pixels = n * rows * cols;
  if (bytes.size() - 16 < pixels) {
    throw FormatError(images_path.string() + ": truncated pixel data at offset " +
                      std::to_string(bytes.size()) + " (expected " +
                      std::to_string(16 + pixels) + " bytes)");
  }
  std::vector<double> values(pixels);
  for (std::size_t i = 0; i < pixels; ++i) values[i] = bytes[16 + i] / 255.0;
  return Tensor({n, 1, rows, cols}, std::move(values));
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  Tensor images = load_idx_images(images_path);
  const auto bytes = slurp(labels_path);
  const std::uint32_t magic = read_be32(bytes, 0, labels_path);
  if (magic != kIdxLabelMagic) {
    throw FormatError(labels_path.string() + ": bad label magic at offset 0");
  }
  const std::size_t n = read_be32(bytes, 4, labels_path);
  if (n != images.dim(0)) {
    throw FormatError(labels_path.string() + ": label count " + std::to_string(n) +
                      " at offset 4 does not match image count " +
                      std::to_string(images.dim(0)));
  }
  if (bytes.size() - 8 < n) {
    throw FormatError(labels_path.string() + ": truncated label data at offset " +
                      std::to_string(bytes.size()));
  }
  Dataset ds{std::move(images), std::vector<int>(n), 10};
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = bytes[8 + i];
    ds.num_classes = std::max(ds.num_classes, ds.labels[i] + 1);
  }
  return ds;
}

void write_idx(const Dataset& ds, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  ds.validate();
  if (ds.samples.rank() != 4 || ds.samples.dim(1) != 1) {
    throw DimensionError("write_idx expects (N,1,H,W) samples, got " +
                         shape_str(ds.samples.shape()));
  }
  std::string img;
  put_be32(img, kIdxImageMagic);
  put_be32(img, static_cast<std::uint32_t>(ds.size()));
  put_be32(img, static_cast<std::uint32_t>(ds.samples.dim(2)));
  put_be32(img, static_cast<std::uint32_t>(ds.samples.dim(3)));
  for (double v : ds.samples.values()) {
    const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    img.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }
  std::string lab;
  put_be32(lab, kIdxLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (int l : ds.labels) {
    if (l > 255) throw std::invalid_argument("IDX labels must fit in one byte");
    lab.push_back(static_cast<char>(static_cast<unsigned char>(l)));
  }
  write_file(images_path, img);
  write_file(labels_path, lab);
}

}  // namespace efl::data
