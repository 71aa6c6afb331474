// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "protoseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <set>
#include <stdexcept>

#include "protoseg/png_io.hpp"
#include "protoseg/textconf.hpp"

namespace protoseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1)      { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else             { r = c; b = x; }
    const double m = v - c;
    return {r + m, g + m, b + m};
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Two texture colors with guaranteed value separation so patterns stay
// visible regardless of hue.
void sample_texture_colors(Rng& rng, Rgb& c1, Rgb& c2) {
    const double h1 = rng.uniform();
    const double s1 = rng.uniform(0.55, 1.0);
    const double v1 = rng.uniform(0.55, 0.95);
    const double h2 = h1 + rng.uniform(0.15, 0.85);
    const double s2 = rng.uniform(0.55, 1.0);
    double v2 = rng.uniform(0.5, 1.0);
    for (int tries = 0; std::fabs(v2 - v1) < 0.25 && tries < 64; ++tries)
        v2 = rng.uniform(0.5, 1.0);
    c1 = hsv_to_rgb(h1, s1, v1);
    c2 = hsv_to_rgb(h2, s2, v2);
}

struct ShapeSpec {
    int family = 0;  // 0 disk, 1 square, 2 triangle, 3 ring
    double cx = 0, cy = 0;
    double radius = 0;       // disk r / square half-diagonal carrier / triangle R / ring outer r
    double half_side = 0;    // square
    double angle = 0;        // square rotation / gradient direction reuse
    double tri_x[3] = {0, 0, 0}, tri_y[3] = {0, 0, 0};
    double inner_ratio = 0;  // ring
    double extent = 0;       // bounding radius, used by gradient texture
};

bool inside_shape(const ShapeSpec& s, double x, double y) {
    const double dx = x - s.cx;
    const double dy = y - s.cy;
    switch (s.family) {
        case 0:
            return dx * dx + dy * dy <= s.radius * s.radius;
        case 1: {
            const double ca = std::cos(s.angle), sa = std::sin(s.angle);
            const double u = ca * dx + sa * dy;
            const double v = -sa * dx + ca * dy;
            return std::fabs(u) <= s.half_side && std::fabs(v) <= s.half_side;
        }
        case 2: {
            // Sign tests against the three edges.
            double sign = 0;
            for (int i = 0; i < 3; ++i) {
                const int j = (i + 1) % 3;
                const double ex = s.tri_x[j] - s.tri_x[i];
                const double ey = s.tri_y[j] - s.tri_y[i];
                const double px = x - s.tri_x[i];
                const double py = y - s.tri_y[i];
                const double cross = ex * py - ey * px;
                if (i == 0) {
                    sign = cross;
                } else if (cross * sign < 0) {
                    return false;
                }
            }
            return true;
        }
        case 3: {
            const double d2 = dx * dx + dy * dy;
            const double ri = s.radius * s.inner_ratio;
            return d2 <= s.radius * s.radius && d2 >= ri * ri;
        }
        default:
            return false;
    }
}

// Samples geometry for one shape of the given family with area close to
// `area`, fully inside an image of side `size` with margin.
ShapeSpec sample_shape(int family, double area, int size, Rng& rng) {
    ShapeSpec s;
    s.family = family;
    const double margin = std::max(1.0, size / 32.0);
    const double limit = size / 2.0 - margin - 1.0;

    switch (family) {
        case 0:
            s.radius = std::sqrt(area / kPi);
            s.extent = s.radius;
            break;
        case 1:
            s.half_side = std::sqrt(area) / 2.0;
            s.angle = rng.uniform(-kPi / 12.0, kPi / 12.0);
            s.extent = s.half_side * std::sqrt(2.0);
            break;
        case 2: {
            const double base = rng.uniform(0.0, 2.0 * kPi);
            double ax[3], ay[3];
            double unit_area = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double th = base + i * 2.0 * kPi / 3.0 + rng.uniform(-0.35, 0.35);
                ax[i] = std::cos(th);
                ay[i] = std::sin(th);
            }
            unit_area = 0.5 * std::fabs((ax[1] - ax[0]) * (ay[2] - ay[0]) -
                                        (ax[2] - ax[0]) * (ay[1] - ay[0]));
            const double r = std::sqrt(area / std::max(unit_area, 0.3));
            s.radius = r;
            for (int i = 0; i < 3; ++i) {
                s.tri_x[i] = ax[i] * r;
                s.tri_y[i] = ay[i] * r;
            }
            s.extent = r;
            break;
        }
        case 3:
            s.inner_ratio = rng.uniform(0.45, 0.6);
            s.radius = std::sqrt(area / (kPi * (1.0 - s.inner_ratio * s.inner_ratio)));
            s.extent = s.radius;
            break;
    }
    const double reach = std::min(s.extent, limit);
    const double lo = reach + margin;
    const double hi = size - 1.0 - reach - margin;
    s.cx = hi > lo ? rng.uniform(lo, hi) : size / 2.0;
    s.cy = hi > lo ? rng.uniform(lo, hi) : size / 2.0;
    if (family == 2) {
        for (int i = 0; i < 3; ++i) {
            s.tri_x[i] += s.cx;
            s.tri_y[i] += s.cy;
        }
    }
    return s;
}

// Upper bound on the area fraction for which the shape still fits inside
// the image with margins.
double max_fraction(int family, int size) {
    const double margin = std::max(1.0, size / 32.0);
    const double limit = size / 2.0 - margin - 1.0;
    const double s2 = static_cast<double>(size) * size;
    double f = 0.0;
    switch (family) {
        case 0: f = kPi * limit * limit / s2; break;
        case 1: f = 2.0 * limit * limit / s2; break;
        case 2: f = 0.8 * limit * limit / s2; break;
        case 3: f = 0.64 * kPi * limit * limit / s2; break;
    }
    const double family_cap[4] = {0.35, 0.33, 0.22, 0.30};
    return std::min(f, family_cap[family]);
}

struct TextureSpec {
    int pattern = 0;     // 0 stripes, 1 checker, 2 dots, 3 gradient
    double scale = 1.0;  // grows for texture families beyond the first four
    double wavelength = 5.0;
    double angle = 0.0;
    double phase = 0.0;
    int cell = 4;
    double off_x = 0.0, off_y = 0.0;
    double pitch = 5.0;
    double dot_radius = 1.6;
    Rgb c1{0.8, 0.2, 0.2}, c2{0.2, 0.2, 0.8};
};

TextureSpec sample_texture(int family, Rng& rng) {
    TextureSpec t;
    t.pattern = family % 4;
    t.scale = 1.0 + family / 4;
    sample_texture_colors(rng, t.c1, t.c2);
    t.wavelength = rng.uniform(4.0, 7.0) * t.scale;
    t.angle = rng.uniform(0.0, kPi);
    t.phase = rng.uniform(0.0, 2.0 * kPi);
    t.cell = static_cast<int>(std::lround(rng.uniform(3.0, 5.0) * t.scale));
    t.off_x = rng.uniform(0.0, static_cast<double>(t.cell));
    t.off_y = rng.uniform(0.0, static_cast<double>(t.cell));
    t.pitch = rng.uniform(4.5, 6.5) * t.scale;
    t.dot_radius = t.pitch * 0.33;
    return t;
}

Rgb texture_color(const TextureSpec& t, const ShapeSpec& s, double x, double y, Rng& noise_rng) {
    switch (t.pattern) {
        case 0: {
            const double u = std::cos(t.angle) * x + std::sin(t.angle) * y;
            const double v = std::sin(2.0 * kPi * u / t.wavelength + t.phase);
            return v > 0 ? t.c1 : t.c2;
        }
        case 1: {
            const int ix = static_cast<int>(std::floor((x + t.off_x) / t.cell));
            const int iy = static_cast<int>(std::floor((y + t.off_y) / t.cell));
            return ((ix + iy) & 1) ? t.c1 : t.c2;
        }
        case 2: {
            const double gx = x + t.off_x;
            const double gy = y + t.off_y;
            const double mx = gx - t.pitch * std::round(gx / t.pitch);
            const double my = gy - t.pitch * std::round(gy / t.pitch);
            return (mx * mx + my * my <= t.dot_radius * t.dot_radius) ? t.c2 : t.c1;
        }
        default: {
            const double u = std::cos(t.angle) * (x - s.cx) + std::sin(t.angle) * (y - s.cy);
            const double span = std::max(s.extent * 1.6, 1.0);
            const double a = clamp01(0.5 + u / span);
            const double n = noise_rng.normal(0.0, 0.02);
            return {clamp01(t.c1.r + (t.c2.r - t.c1.r) * a + n),
                    clamp01(t.c1.g + (t.c2.g - t.c1.g) * a + n),
                    clamp01(t.c1.b + (t.c2.b - t.c1.b) * a + n)};
        }
    }
}

void set_pixel(Tensor<float>& image, int x, int y, const Rgb& c) {
    const int size = image.dim(1);
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    image.at(0, y, x) = static_cast<float>(clamp01(c.r));
    image.at(1, y, x) = static_cast<float>(clamp01(c.g));
    image.at(2, y, x) = static_cast<float>(clamp01(c.b));
}

void draw_clutter(Tensor<float>& image, double base_gray, Rng& rng) {
    const int size = image.dim(1);
    const int count = rng.uniform_int(4, 9);
    int bright_left = 2;
    for (int i = 0; i < count; ++i) {
        if (rng.coin(0.5)) {
            // Thin line segment.
            const double x0 = rng.uniform(0.0, size - 1.0), y0 = rng.uniform(0.0, size - 1.0);
            const double x1 = rng.uniform(0.0, size - 1.0), y1 = rng.uniform(0.0, size - 1.0);
            const double g = clamp01(base_gray + rng.uniform(-0.12, 0.12));
            const Rgb c{g, g, g};
            const double len = std::hypot(x1 - x0, y1 - y0);
            const int steps = std::max(1, static_cast<int>(len));
            for (int sstep = 0; sstep <= steps; ++sstep) {
                const double a = static_cast<double>(sstep) / steps;
                set_pixel(image, static_cast<int>(std::lround(x0 + a * (x1 - x0))),
                          static_cast<int>(std::lround(y0 + a * (y1 - y0))), c);
            }
        } else {
            // Small flat blob; occasionally bright, so brightness alone
            // cannot separate foreground from background.
            const double r = rng.uniform(1.0, 2.5);
            const double cx = rng.uniform(r, size - 1.0 - r);
            const double cy = rng.uniform(r, size - 1.0 - r);
            Rgb c;
            if (bright_left > 0 && rng.coin(0.4)) {
                --bright_left;
                c = hsv_to_rgb(rng.uniform(), rng.uniform(0.3, 0.9), rng.uniform(0.5, 0.9));
            } else {
                const double g = clamp01(base_gray + rng.uniform(-0.1, 0.1));
                c = {g, g, g};
            }
            for (int y = static_cast<int>(cy - r); y <= static_cast<int>(cy + r) + 1; ++y) {
                for (int x = static_cast<int>(cx - r); x <= static_cast<int>(cx + r) + 1; ++x) {
                    const double dx = x + 0.5 - cx - 0.5, dy = y + 0.5 - cy - 0.5;
                    if (dx * dx + dy * dy <= r * r) set_pixel(image, x, y, c);
                }
            }
        }
    }
}

ImageSample generate_sample(const GenConfig& cfg, int class_id, std::uint64_t sample_index) {
    Rng rng = Rng::derive(cfg.seed, sample_index);
    const int size = cfg.image_size;
    const int family = (class_id - 1) % 4;
    const int texture_family = (class_id - 1) / 4;

    ImageSample sample;
    sample.class_id = class_id;
    sample.image = Tensor<float>({3, size, size});
    sample.label_map = Tensor<std::uint8_t>({size, size});

    // Background: dark noisy gray.
    const double base_gray = rng.uniform(0.12, 0.32);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double g = clamp01(base_gray + rng.normal(0.0, 0.03));
            for (int c = 0; c < 3; ++c)
                sample.image.at(c, y, x) =
                    static_cast<float>(clamp01(g + rng.normal(0.0, 0.008)));
        }
    }
    draw_clutter(sample.image, base_gray, rng);

    // Foreground shape: resample geometry until the rasterized area lands
    // inside the contract bounds.
    const double f_lo = 0.07;
    const double f_hi = max_fraction(family, size);
    if (f_hi <= f_lo)
        throw std::invalid_argument("generate_dataset: image_size too small for shape placement");

    ShapeSpec shape;
    std::vector<std::pair<int, int>> fg;
    const double total = static_cast<double>(size) * size;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 64)
            throw std::logic_error("generate_dataset: could not place shape within area bounds");
        const double frac = rng.uniform(f_lo, f_hi);
        shape = sample_shape(family, frac * total, size, rng);
        fg.clear();
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                if (inside_shape(shape, x + 0.5, y + 0.5)) fg.emplace_back(x, y);
        const double got = fg.size() / total;
        if (got >= 0.055 && got <= 0.45) break;
    }

    const TextureSpec texture = sample_texture(texture_family, rng);
    for (const auto& [x, y] : fg) {
        set_pixel(sample.image, x, y, texture_color(texture, shape, x + 0.5, y + 0.5, rng));
        sample.label_map.at(y, x) = static_cast<std::uint8_t>(class_id);
    }

    // Snap to the 8-bit grid so the on-disk PNG round-trips losslessly.
    for (std::size_t i = 0; i < sample.image.size(); ++i) {
        const int q = static_cast<int>(std::lround(sample.image[i] * 255.0f));
        sample.image[i] = static_cast<float>(q) / 255.0f;
    }
    return sample;
}

}  // namespace

std::vector<ImageSample> generate_dataset(const GenConfig& config) {
    if (config.num_classes < 4 || config.num_classes % 4 != 0)
        throw std::invalid_argument("generate_dataset: num_classes must be a positive multiple of 4");
    if (config.image_size < 16 || config.image_size % 8 != 0)
        throw std::invalid_argument("generate_dataset: image_size must be a multiple of 8 (>= 16)");
    if (config.images_per_class < 1)
        throw std::invalid_argument("generate_dataset: images_per_class must be >= 1");

    std::vector<ImageSample> samples;
    samples.reserve(static_cast<std::size_t>(config.num_classes) * config.images_per_class);
    std::uint64_t index = 0;
    for (int c = 1; c <= config.num_classes; ++c)
        for (int i = 0; i < config.images_per_class; ++i)
            samples.push_back(generate_sample(config, c, index++));
    return samples;
}

SplitConfig make_splits(int num_classes, int split_index) {
    if (num_classes < 4 || num_classes % 4 != 0)
        throw std::invalid_argument("make_splits: num_classes must be a positive multiple of 4");
    if (split_index < 0 || split_index > 3)
        throw std::invalid_argument("make_splits: split_index must be in {0..3}");
    const int quarter = num_classes / 4;
    SplitConfig split;
    split.split_index = split_index;
    const int test_lo = split_index * quarter + 1;
    const int test_hi = test_lo + quarter - 1;
    for (int c = 1; c <= num_classes; ++c) {
        if (c >= test_lo && c <= test_hi)
            split.test_classes.push_back(c);
        else
            split.train_classes.push_back(c);
    }
    return split;
}

Tensor<std::uint8_t> binarize_mask(const Tensor<std::uint8_t>& label_map, int class_id) {
    Tensor<std::uint8_t> out(label_map.shape());
    for (std::size_t i = 0; i < label_map.size(); ++i)
        out[i] = label_map[i] == class_id ? 1 : 0;
    return out;
}

Dataset Dataset::build(std::vector<ImageSample> samples, const GenConfig& config) {
    Dataset ds;
    ds.samples = std::move(samples);
    ds.config = config;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        ds.by_class[ds.samples[i].class_id].push_back(static_cast<int>(i));
    return ds;
}

Episode sample_episode(const Dataset& dataset, const SplitConfig& split, Phase phase, int k,
                       Rng& rng) {
    if (k < 1) throw std::invalid_argument("sample_episode: k must be >= 1");
    const std::vector<int>& classes =
        phase == Phase::train ? split.train_classes : split.test_classes;
    if (classes.empty()) throw std::invalid_argument("sample_episode: split has no classes");

    const int target = classes[rng.uniform_int(0, static_cast<int>(classes.size()) - 1)];
    const auto it = dataset.by_class.find(target);
    if (it == dataset.by_class.end() || static_cast<int>(it->second.size()) < k + 1)
        throw std::runtime_error("sample_episode: fewer than k+1 images for class " +
                                 std::to_string(target));

    // k+1 distinct sample indices (partial Fisher-Yates).
    std::vector<int> pool = it->second;
    for (int i = 0; i <= k; ++i) {
        const int j = rng.uniform_int(i, static_cast<int>(pool.size()) - 1);
        std::swap(pool[i], pool[j]);
    }

    Episode ep;
    ep.target_class = target;
    for (int i = 0; i < k; ++i) {
        const ImageSample& s = dataset.samples[pool[i]];
        SupportPair sp;
        sp.image = s.image;
        sp.mask = binarize_mask(s.label_map, target);
        sp.label_map = s.label_map;
        sp.sample_index = pool[i];
        ep.supports.push_back(std::move(sp));
    }
    const ImageSample& q = dataset.samples[pool[k]];
    ep.query_image = q.image;
    ep.query_mask = binarize_mask(q.label_map, target);
    ep.query_label_map = q.label_map;
    ep.query_index = pool[k];
    return ep;
}

namespace {

// 8-connected components of a binary mask; returns per-pixel component id
// (-1 background) plus per-component pixel lists in scan order.
std::vector<std::vector<std::pair<int, int>>> connected_components(
    const Tensor<std::uint8_t>& mask) {
    const int h = mask.dim(0), w = mask.dim(1);
    std::vector<int> comp(static_cast<std::size_t>(h) * w, -1);
    std::vector<std::vector<std::pair<int, int>>> groups;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.at(y, x) == 0 || comp[static_cast<std::size_t>(y) * w + x] >= 0) continue;
            const int id = static_cast<int>(groups.size());
            groups.emplace_back();
            std::deque<std::pair<int, int>> queue{{x, y}};
            comp[static_cast<std::size_t>(y) * w + x] = id;
            while (!queue.empty()) {
                const auto [cx, cy] = queue.front();
                queue.pop_front();
                groups[id].emplace_back(cx, cy);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        auto& cell = comp[static_cast<std::size_t>(ny) * w + nx];
                        if (mask.at(ny, nx) != 0 && cell < 0) {
                            cell = id;
                            queue.emplace_back(nx, ny);
                        }
                    }
                }
            }
        }
    }
    return groups;
}

}  // namespace

Tensor<std::uint8_t> weaken_annotation(const Tensor<std::uint8_t>& mask, WeakMode mode, Rng& rng) {
    const int h = mask.dim(0), w = mask.dim(1);
    std::size_t fg_total = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) ++fg_total;
    if (fg_total == 0)
        throw std::invalid_argument("weaken_annotation: mask has no foreground pixels");

    const auto groups = connected_components(mask);
    Tensor<std::uint8_t> out({h, w});

    if (mode == WeakMode::bbox) {
        const auto& comp = groups[rng.uniform_int(0, static_cast<int>(groups.size()) - 1)];
        int x0 = w, x1 = -1, y0 = h, y1 = -1;
        for (const auto& [x, y] : comp) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) out.at(y, x) = 1;
        return out;
    }

    // Scribble: random walk inside the largest component, each visited cell
    // dilated by one pixel (clipped to the foreground), capped at 20% of
    // the foreground.
    std::size_t largest = 0;
    for (std::size_t g = 1; g < groups.size(); ++g)
        if (groups[g].size() > groups[largest].size()) largest = g;
    const auto& comp = groups[largest];

    std::set<std::pair<int, int>> comp_set(comp.begin(), comp.end());
    const std::size_t cap =
        std::max<std::size_t>(1, static_cast<std::size_t>(0.2 * static_cast<double>(fg_total)));
    const int walk_len =
        std::max(10, static_cast<int>(std::lround(0.05 * static_cast<double>(fg_total))));

    std::size_t placed = 0;
    auto stamp = [&](int x, int y) {
        for (int dy = -1; dy <= 1 && placed < cap; ++dy) {
            for (int dx = -1; dx <= 1 && placed < cap; ++dx) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                if (mask.at(ny, nx) == 0 || out.at(ny, nx) != 0) continue;
                out.at(ny, nx) = 1;
                ++placed;
            }
        }
    };

    auto [cx, cy] = comp[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(comp.size()) - 1))];
    out.at(cy, cx) = 1;
    ++placed;
    stamp(cx, cy);
    static constexpr int kDx[4] = {1, -1, 0, 0};
    static constexpr int kDy[4] = {0, 0, 1, -1};
    for (int step = 0; step < walk_len && placed < cap; ++step) {
        int options[4];
        int n_opts = 0;
        for (int d = 0; d < 4; ++d) {
            const int nx = cx + kDx[d], ny = cy + kDy[d];
            if (comp_set.count({nx, ny})) options[n_opts++] = d;
        }
        if (n_opts == 0) break;
        const int d = options[rng.uniform_int(0, n_opts - 1)];
        cx += kDx[d];
        cy += kDy[d];
        if (out.at(cy, cx) == 0 && placed < cap) {
            out.at(cy, cx) = 1;
            ++placed;
        }
        stamp(cx, cy);
    }
    return out;
}

namespace {

std::string sample_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", index);
    return buf;
}

}  // namespace

void save_dataset(const std::string& dir, const std::vector<ImageSample>& samples,
                  const GenConfig& config) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "labels");

    TextConfig manifest;
    manifest.set("format", "protoseg-dataset-v1");
    manifest.set("generator.num_classes", config.num_classes);
    manifest.set("generator.images_per_class", config.images_per_class);
    manifest.set("generator.image_size", config.image_size);
    manifest.set("generator.seed", config.seed);
    manifest.set("sample_count", static_cast<int>(samples.size()));

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const ImageSample& s = samples[i];
        const int size = s.label_map.dim(0);
        const std::string id = sample_id(static_cast<int>(i));

        PngImage rgb;
        rgb.width = rgb.height = size;
        rgb.channels = 3;
        rgb.pixels.resize(static_cast<std::size_t>(size) * size * 3);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                for (int c = 0; c < 3; ++c)
                    rgb.at(y, x, c) = static_cast<std::uint8_t>(
                        std::lround(s.image.at(c, y, x) * 255.0f));

        PngImage lab;
        lab.width = lab.height = size;
        lab.channels = 1;
        lab.pixels.resize(static_cast<std::size_t>(size) * size);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) lab.at(y, x) = s.label_map.at(y, x);

        write_png((fs::path(dir) / "images" / (id + ".png")).string(), rgb);
        write_png((fs::path(dir) / "labels" / (id + ".png")).string(), lab);

        manifest.set("samples.s" + id + ".class", s.class_id);
        manifest.set("samples.s" + id + ".image", "images/" + id + ".png");
        manifest.set("samples.s" + id + ".label", "labels/" + id + ".png");
    }
    manifest.save((fs::path(dir) / "manifest.txt").string());
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const TextConfig manifest = TextConfig::load((fs::path(dir) / "manifest.txt").string());
    if (manifest.get("format") != "protoseg-dataset-v1")
        throw std::runtime_error("load_dataset: unknown manifest format");

    GenConfig config;
    config.num_classes = static_cast<int>(manifest.get_int("generator.num_classes"));
    config.images_per_class = static_cast<int>(manifest.get_int("generator.images_per_class"));
    config.image_size = static_cast<int>(manifest.get_int("generator.image_size"));
    config.seed = static_cast<std::uint64_t>(manifest.get_int("generator.seed"));

    const int count = static_cast<int>(manifest.get_int("sample_count"));
    std::vector<ImageSample> samples;
    samples.reserve(count);
    for (int i = 0; i < count; ++i) {
        const std::string key = "samples.s" + sample_id(i);
        ImageSample s;
        s.class_id = static_cast<int>(manifest.get_int(key + ".class"));

        const PngImage rgb = read_png((fs::path(dir) / manifest.get(key + ".image")).string());
        if (rgb.channels != 3) throw std::runtime_error("load_dataset: image is not RGB");
        s.image = Tensor<float>({3, rgb.height, rgb.width});
        for (int y = 0; y < rgb.height; ++y)
            for (int x = 0; x < rgb.width; ++x)
                for (int c = 0; c < 3; ++c)
                    s.image.at(c, y, x) = static_cast<float>(rgb.at(y, x, c)) / 255.0f;

        const PngImage lab = read_png((fs::path(dir) / manifest.get(key + ".label")).string());
        if (lab.channels != 1) throw std::runtime_error("load_dataset: label map is not grayscale");
        s.label_map = Tensor<std::uint8_t>({lab.height, lab.width});
        for (int y = 0; y < lab.height; ++y)
            for (int x = 0; x < lab.width; ++x) s.label_map.at(y, x) = lab.at(y, x);

        samples.push_back(std::move(s));
    }
    return Dataset::build(std::move(samples), config);
}

}  // namespace protoseg
