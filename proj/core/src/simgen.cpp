#include "skpd/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "skpd/error.hpp"
#include "skpd/io.hpp"
#include "skpd/linalg.hpp"
#include "skpd/rng.hpp"

namespace skpd {

SignalSpec parse_signal(const std::string& name, const Dims& image_dims) {
  SignalSpec spec;
  spec.image_dims = image_dims;
  if (name == "one-circle" || name == "circle") {
    spec.kind = SignalKind::one_circle;
  } else if (name == "three-circles") {
    spec.kind = SignalKind::three_circles;
  } else if (name == "butterfly") {
    spec.kind = SignalKind::butterfly;
  } else if (name == "one-ball") {
    spec.kind = SignalKind::one_ball;
  } else if (name == "two-balls") {
    spec.kind = SignalKind::two_balls;
  } else if (name.rfind("mask:", 0) == 0) {
    spec.kind = SignalKind::custom_mask;
    spec.mask_path = name.substr(5);
  } else {
    throw InvalidArgument("unknown signal '" + name + "'");
  }
  return spec;
}

const char* to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::one_circle: return "one-circle";
    case SignalKind::three_circles: return "three-circles";
    case SignalKind::butterfly: return "butterfly";
    case SignalKind::one_ball: return "one-ball";
    case SignalKind::two_balls: return "two-balls";
    case SignalKind::custom_mask: return "mask";
  }
  return "unknown";
}

NdArray centered_disc(const Dims& dims, double radius) {
  if (dims.size() != 2 && dims.size() != 3) throw ShapeError("centered_disc: rank 2 or 3 only");
  NdArray out(dims);
  const double r2 = radius * radius;
  std::vector<std::size_t> idx(dims.size(), 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    double d2 = 0.0;
    for (std::size_t ax = 0; ax < dims.size(); ++ax) {
      const double c = (static_cast<double>(dims[ax]) - 1.0) / 2.0;
      const double u = static_cast<double>(idx[ax]) - c;
      d2 += u * u;
    }
    if (d2 <= r2) out[flat] = 1.0;
    for (std::size_t ax = dims.size(); ax-- > 0;) {
      if (++idx[ax] < dims[ax]) break;
      idx[ax] = 0;
    }
  }
  return out;
}

namespace {

NdArray unit_grid(const Dims& grid, std::initializer_list<std::vector<std::size_t>> ones) {
  NdArray a(grid);
  for (const auto& at : ones) a[a.offset(at)] = 1.0;
  return a;
}

Dims split(const Dims& image, const Dims& grid, const char* what) {
  if (image.size() != grid.size()) {
    throw ShapeError(std::string(what) + " needs a rank-" + std::to_string(grid.size()) + " image");
  }
  Dims block(image.size());
  for (std::size_t ax = 0; ax < image.size(); ++ax) {
    if (image[ax] % grid[ax] != 0) {
      throw ShapeError(std::string(what) + ": image " + dims_to_string(image) +
                       " is not divisible by grid " + dims_to_string(grid));
    }
    block[ax] = image[ax] / grid[ax];
  }
  return block;
}

double block_scale(const Dims& block, double reference) {
  return static_cast<double>(*std::min_element(block.begin(), block.end())) / reference;
}

}  // namespace

PlantedSignal planted_terms(const SignalSpec& spec) {
  PlantedSignal out;
  switch (spec.kind) {
    case SignalKind::one_circle: {
      const Dims grid{4, 4};
      const Dims block = split(spec.image_dims, grid, "one-circle");
      const double s = block_scale(block, 32.0);
      out.grids.push_back(unit_grid(grid, {{1, 2}}));
      out.blocks.push_back(centered_disc(block, 15.0 * s));
      break;
    }
    case SignalKind::three_circles: {
      const Dims grid{4, 4};
      const Dims block = split(spec.image_dims, grid, "three-circles");
      const double s = block_scale(block, 32.0);
      out.grids.push_back(unit_grid(grid, {{0, 0}, {1, 2}}));
      out.blocks.push_back(centered_disc(block, 4.0 * s));
      out.grids.push_back(unit_grid(grid, {{1, 2}}));
      out.blocks.push_back(centered_disc(block, 13.0 * s));
      out.grids.push_back(unit_grid(grid, {{3, 1}}));
      out.blocks.push_back(centered_disc(block, 7.0 * s));
      break;
    }
    case SignalKind::one_ball: {
      const Dims grid{5, 6, 5};
      const Dims block = split(spec.image_dims, grid, "one-ball");
      const double s = block_scale(block, 16.0);
      out.grids.push_back(unit_grid(grid, {{2, 2, 2}}));
      out.blocks.push_back(centered_disc(block, 6.0 * s));
      break;
    }
    case SignalKind::two_balls: {
      const Dims grid{5, 6, 5};
      const Dims block = split(spec.image_dims, grid, "two-balls");
      const double s = block_scale(block, 16.0);
      out.grids.push_back(unit_grid(grid, {{2, 2, 2}}));
      out.blocks.push_back(centered_disc(block, 6.0 * s));
      out.grids.push_back(unit_grid(grid, {{0, 0, 2}}));
      out.blocks.push_back(centered_disc(block, 4.0 * s));
      break;
    }
    case SignalKind::butterfly:
    case SignalKind::custom_mask:
      throw InvalidArgument("planted_terms: mask signals have no Kronecker construction");
  }
  for (auto& b : out.blocks) b *= spec.intensity;
  return out;
}

NdArray butterfly_silhouette(const Dims& dims) {
  if (dims.size() != 2) throw ShapeError("butterfly_silhouette: 2D only");
  NdArray out(dims);
  const double sy = static_cast<double>(dims[0]) / 128.0;
  const double sx = static_cast<double>(dims[1]) / 128.0;
  struct Ellipse {
    double cy, cx, ry, rx, angle;
  };
  const double tilt = 30.0 * std::numbers::pi / 180.0;
  const Ellipse parts[] = {
      {50.0, 42.0, 12.0, 18.0, tilt},   {50.0, 86.0, 12.0, 18.0, -tilt},  // upper wings
      {80.0, 48.0, 8.0, 11.0, -tilt},   {80.0, 80.0, 8.0, 11.0, tilt},    // lower wings
      {64.0, 64.0, 24.0, 2.5, 0.0},                                        // body
  };
  for (std::size_t i = 0; i < dims[0]; ++i) {
    for (std::size_t j = 0; j < dims[1]; ++j) {
      const double y = (static_cast<double>(i) + 0.5) / sy;
      const double x = (static_cast<double>(j) + 0.5) / sx;
      for (const auto& e : parts) {
        const double dy = y - e.cy;
        const double dx = x - e.cx;
        const double u = dx * std::cos(e.angle) + dy * std::sin(e.angle);
        const double v = -dx * std::sin(e.angle) + dy * std::cos(e.angle);
        if ((u * u) / (e.rx * e.rx) + (v * v) / (e.ry * e.ry) <= 1.0) {
          out(i, j) = 1.0;
          break;
        }
      }
    }
  }
  return out;
}

NdArray load_mask(const std::string& path, const Dims& expected) {
  const NdArray img = read_pgm(path);
  if (img.dims() != expected) {
    throw IoError("mask " + path + " has dims " + dims_to_string(img.dims()) + ", expected " +
                  dims_to_string(expected));
  }
  NdArray out(expected);
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] != 0.0 ? 1.0 : 0.0;
  return out;
}

NdArray make_signal(const SignalSpec& spec) {
  if (spec.kind == SignalKind::butterfly || spec.kind == SignalKind::custom_mask) {
    std::string path = spec.mask_path;
    if (spec.kind == SignalKind::butterfly && path.empty()) path = default_butterfly_path();
    NdArray mask = load_mask(path, spec.image_dims);
    mask *= spec.intensity;
    return mask;
  }
  const PlantedSignal terms = planted_terms(spec);
  NdArray out(spec.image_dims);
  for (std::size_t r = 0; r < terms.grids.size(); ++r) {
    const NdArray c = kron(terms.grids[r], terms.blocks[r]);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] != 0.0) out[i] = spec.intensity;
    }
  }
  return out;
}

NdArray draw_images(std::size_t n, const Dims& image_dims, std::uint64_t seed) {
  Dims dims{n};
  dims.insert(dims.end(), image_dims.begin(), image_dims.end());
  NdArray out(dims);
  const std::size_t d = dims_product(image_dims);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream rs(seed, Stream::images, static_cast<std::uint32_t>(i));
    rs.fill_normal(out.data().subspan(i * d, d));
  }
  return out;
}

Vector draw_noise(std::size_t n, double sigma, std::uint64_t seed) {
  Vector z(static_cast<Eigen::Index>(n));
  RandomStream rs(seed, Stream::noise, 0);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigma * rs.normal();
  return z;
}

GeneratedStudy gen_dataset(const NdArray& c, const Dims& block_dims, std::size_t n, double sigma,
                           std::uint64_t seed, bool retain_raw) {
  if (n < 1) throw InvalidArgument("gen_dataset: n must be positive");
  if (sigma < 0.0) throw InvalidArgument("gen_dataset: sigma must be nonnegative");
  const NdArray images = draw_images(n, c.dims(), seed);
  Vector y = draw_noise(n, sigma, seed);
  const std::size_t d = c.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = images.data().subspan(i * d, d);
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += x[k] * c[k];
    y[static_cast<Eigen::Index>(i)] += s;
  }
  GeneratedStudy out;
  out.c_true = c;
  out.data = make_dataset(images, y, block_dims, retain_raw);
  out.seed = seed;
  out.sigma = sigma;
  return out;
}

GeneratedStudy gen_nonlinear_response(const PlantedSignal& terms, Activation activation,
                                      const Dims& block_dims, std::size_t n, double sigma,
                                      std::uint64_t seed, bool retain_raw) {
  if (terms.grids.empty() || terms.grids.size() != terms.blocks.size()) {
    throw InvalidArgument("gen_nonlinear_response: need matching A_r and B_r");
  }
  NdArray c(kron(terms.grids[0], terms.blocks[0]).dims());
  for (std::size_t r = 0; r < terms.grids.size(); ++r) c += kron(terms.grids[r], terms.blocks[r]);
  if (activation == Activation::identity) {
    return gen_dataset(c, block_dims, n, sigma, seed, retain_raw);
  }

  NonlinearModel truth;
  truth.shape = KpdShape(c.dims(), terms.blocks[0].dims());
  truth.activation = activation;
  const auto r = static_cast<Eigen::Index>(terms.grids.size());
  truth.maps.resize(static_cast<Eigen::Index>(truth.shape.grid_size()), r);
  truth.filters.resize(static_cast<Eigen::Index>(truth.shape.block_size()), r);
  for (Eigen::Index k = 0; k < r; ++k) {
    if (terms.grids[static_cast<std::size_t>(k)].dims() != truth.shape.grid_dims() ||
        terms.blocks[static_cast<std::size_t>(k)].dims() != truth.shape.block_dims()) {
      throw ShapeError("gen_nonlinear_response: all terms must share grid and block dims");
    }
    truth.maps.col(k) = vec_row_major(terms.grids[static_cast<std::size_t>(k)]);
    truth.filters.col(k) = vec_row_major(terms.blocks[static_cast<std::size_t>(k)]);
  }

  const NdArray images = draw_images(n, c.dims(), seed);
  Vector y = draw_noise(n, sigma, seed);
  const std::size_t d = c.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = images.data().subspan(i * d, d);
    const NdArray img(c.dims(), std::vector<double>(x.begin(), x.end()));
    y[static_cast<Eigen::Index>(i)] += predict(truth, img);
  }
  GeneratedStudy out;
  out.c_true = std::move(c);
  out.data = make_dataset(images, y, block_dims, retain_raw);
  out.seed = seed;
  out.sigma = sigma;
  return out;
}

NdArray pad_to_blocks(const NdArray& image, const Dims& block_dims) {
  if (image.rank() != block_dims.size()) throw ShapeError("pad_to_blocks: rank mismatch");
  Dims padded(image.rank());
  for (std::size_t ax = 0; ax < image.rank(); ++ax) {
    if (block_dims[ax] == 0) throw ShapeError("pad_to_blocks: zero block dim");
    padded[ax] = (image.dims()[ax] + block_dims[ax] - 1) / block_dims[ax] * block_dims[ax];
  }
  if (padded == image.dims()) return image;
  NdArray out(padded);
  std::vector<std::size_t> idx(image.rank(), 0);
  for (std::size_t flat = 0; flat < image.size(); ++flat) {
    out[out.offset(idx)] = image[flat];
    for (std::size_t ax = image.rank(); ax-- > 0;) {
      if (++idx[ax] < image.dims()[ax]) break;
      idx[ax] = 0;
    }
  }
  return out;
}

}  // namespace skpd
