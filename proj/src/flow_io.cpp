#include "pf/flow_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <deque>
#include <fstream>
#include <stdexcept>

#include "pf/csv.hpp"

namespace pf {

namespace {

constexpr float kFloMagic = 202021.25f;

void put_f32(std::ostream& out, float v) {
  static_assert(std::endian::native == std::endian::little,
                "flo writer assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), 4);
}

void put_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

float get_f32(std::istream& in, const std::string& path) {
  float v;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (in.gcount() != 4) throw std::runtime_error(path + ": truncated flow file");
  return v;
}

std::int32_t get_i32(std::istream& in, const std::string& path) {
  std::int32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (in.gcount() != 4) throw std::runtime_error(path + ": truncated flow file");
  return v;
}

}  // namespace

bool FlowField::all_valid() const {
  for (std::uint8_t f : valid)
    if (!f) return false;
  return true;
}

void write_flo(const FlowField& flow, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  put_f32(out, kFloMagic);
  put_i32(out, flow.width);
  put_i32(out, flow.height);
  size_t n = static_cast<size_t>(flow.width) * flow.height;
  for (size_t i = 0; i < n; ++i) {
    put_f32(out, flow.u[i]);
    put_f32(out, flow.v[i]);
  }
  if (!out) throw std::runtime_error(path + ": write failed");
  out.close();

  bool any_score = false;
  for (float s : flow.score)
    if (s != 0.f) {
      any_score = true;
      break;
    }
  std::string meta_path = path + ".meta";
  if (flow.all_valid() && !any_score) {
    std::remove(meta_path.c_str());
    return;
  }
  std::ofstream meta(meta_path);
  if (!meta) throw std::runtime_error(meta_path + ": cannot open for writing");
  meta << "valid,score\n";
  for (size_t i = 0; i < n; ++i)
    meta << int(flow.valid[i]) << "," << format_float(flow.score[i]) << "\n";
  if (!meta) throw std::runtime_error(meta_path + ": write failed");
}

FlowField read_flo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open flow file");
  float magic = get_f32(in, path);
  if (magic != kFloMagic)
    throw std::runtime_error(path + ": bad flow magic number");
  std::int32_t w = get_i32(in, path);
  std::int32_t h = get_i32(in, path);
  if (w <= 0 || h <= 0)
    throw std::runtime_error(path + ": bad flow dimensions");
  FlowField flow(w, h);
  size_t n = static_cast<size_t>(w) * h;
  std::fill(flow.valid.begin(), flow.valid.end(), 1);
  for (size_t i = 0; i < n; ++i) {
    flow.u[i] = get_f32(in, path);
    flow.v[i] = get_f32(in, path);
  }

  std::string meta_path = path + ".meta";
  std::ifstream probe(meta_path);
  if (!probe) return flow;
  probe.close();
  auto lines = read_lines(meta_path);
  if (lines.empty() || lines[0] != "valid,score")
    throw std::runtime_error(meta_path + ": bad sidecar header");
  if (lines.size() != n + 1)
    throw std::runtime_error(meta_path + ": expected " + std::to_string(n) +
                             " pixel rows, got " +
                             std::to_string(lines.size() - 1));
  for (size_t i = 0; i < n; ++i) {
    auto fields = split_csv_line(lines[i + 1]);
    if (fields.size() != 2)
      throw std::runtime_error(meta_path + ": bad row " + std::to_string(i + 2));
    flow.valid[i] = parse_int(fields[0], meta_path) != 0;
    flow.score[i] = static_cast<float>(parse_double(fields[1], meta_path));
  }
  return flow;
}

Image warp_backward(const Image& target, const FlowField& flow,
                    HoleMode holes) {
  if (flow.width <= 0 || flow.height <= 0)
    throw std::invalid_argument("warp_backward: empty flow field");
  Image out(flow.width, flow.height, target.channels);
  std::vector<std::uint8_t> filled(flow.u.size(), 0);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      size_t i = flow.idx(x, y);
      if (!flow.valid[i]) continue;
      double sx = x + flow.u[i], sy = y + flow.v[i];
      for (int c = 0; c < target.channels; ++c)
        out.at(x, y, c) = sample_bilinear(target, sx, sy, c);
      filled[i] = 1;
    }
  if (holes == HoleMode::black) return out;

  // Nearest-valid fill: multi-source BFS over the 4-neighborhood.
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x)
      if (filled[flow.idx(x, y)]) queue.emplace_back(x, y);
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= flow.width || ny >= flow.height) continue;
      size_t ni = flow.idx(nx, ny);
      if (filled[ni]) continue;
      for (int c = 0; c < target.channels; ++c)
        out.at(nx, ny, c) = out.at(x, y, c);
      filled[ni] = 1;
      queue.emplace_back(nx, ny);
    }
  }
  return out;
}

}  // namespace pf
