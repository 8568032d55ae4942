#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "osc/parallel.hpp"
#include "osc/tensor.hpp"
#include "osc/tensor_io.hpp"

namespace osc {

/// Masked PSNR with peak 1.0, over the I = 1 pixels only.
/// Identical images give +infinity (serialized as the literal "inf").
inline double psnr_masked(const Tensor& est, const Tensor& ref, const Tensor& I) {
    require(est.same_shape(ref) && ref.same_shape(I), "psnr_masked: shape mismatch");
    double se = 0.0, n = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        const double d = est.data[i] - ref.data[i];
        se += I.data[i] * d * d;
        n += I.data[i];
    }
    require(n > 0.0, "psnr_masked: empty mask");
    if (se == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(n / se);
}

inline std::string format_metric(double v) {
    if (std::isinf(v)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

/// SSIM with the standard 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, data range 1.0, averaged over window centers inside I. Window
/// statistics use mask-weighted Gaussian taps (metal and out-of-bounds pixels
/// carry zero weight), so the value depends only on I-pixels.
inline double ssim_masked(const Tensor& est, const Tensor& ref, const Tensor& I) {
    require(est.same_shape(ref) && ref.same_shape(I), "ssim_masked: shape mismatch");
    const std::size_t H = est.rows(), W = est.cols();
    constexpr int HALF = 5;
    constexpr double C1 = 0.01 * 0.01;
    constexpr double C2 = 0.03 * 0.03;
    double g[2 * HALF + 1][2 * HALF + 1];
    for (int u = -HALF; u <= HALF; ++u)
        for (int v = -HALF; v <= HALF; ++v)
            g[u + HALF][v + HALF] =
                std::exp(-(u * u + v * v) / (2.0 * 1.5 * 1.5));

    std::vector<double> row_sum(H, 0.0), row_cnt(H, 0.0);
    parallel_for(H, [&](std::size_t i) {
        for (std::size_t j = 0; j < W; ++j) {
            if (I(i, j) == 0.0) continue;
            double wsum = 0.0, mx = 0.0, my = 0.0;
            for (int u = -HALF; u <= HALF; ++u) {
                const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + u;
                if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(H)) continue;
                for (int v = -HALF; v <= HALF; ++v) {
                    const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j) + v;
                    if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(W)) continue;
                    const double w = g[u + HALF][v + HALF] * I(ii, jj);
                    wsum += w;
                    mx += w * est(ii, jj);
                    my += w * ref(ii, jj);
                }
            }
            mx /= wsum;
            my /= wsum;
            double vx = 0.0, vy = 0.0, cxy = 0.0;
            for (int u = -HALF; u <= HALF; ++u) {
                const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + u;
                if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(H)) continue;
                for (int v = -HALF; v <= HALF; ++v) {
                    const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j) + v;
                    if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(W)) continue;
                    const double w = g[u + HALF][v + HALF] * I(ii, jj);
                    const double dx = est(ii, jj) - mx;
                    const double dy = ref(ii, jj) - my;
                    vx += w * dx * dx;
                    vy += w * dy * dy;
                    cxy += w * dx * dy;
                }
            }
            vx /= wsum;
            vy /= wsum;
            cxy /= wsum;
            const double val = ((2.0 * mx * my + C1) * (2.0 * cxy + C2)) /
                               ((mx * mx + my * my + C1) * (vx + vy + C2));
            row_sum[i] += val;
            row_cnt[i] += 1.0;
        }
    });
    double sum = 0.0, cnt = 0.0;
    for (std::size_t i = 0; i < H; ++i) {
        sum += row_sum[i];
        cnt += row_cnt[i];
    }
    require(cnt > 0.0, "ssim_masked: empty mask");
    return sum / cnt;
}

struct EvalRow {
    std::string id;
    bool missing = false;
    double psnr_input = 0.0, psnr_output = 0.0;
    double ssim_input = 0.0, ssim_output = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_psnr_input = 0.0, mean_psnr_output = 0.0;
    double mean_ssim_input = 0.0, mean_ssim_output = 0.0;
    double median_psnr_input = 0.0, median_psnr_output = 0.0;
    double median_ssim_input = 0.0, median_ssim_output = 0.0;
    bool any_missing = false;
};

namespace detail {
inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
} // namespace detail

/// Scores results_dir/<id>/x.osct against dataset_dir/<id>/{x,y,i}.osct.
/// Sample ids are the dataset's subdirectory names, ascending.
inline EvalReport evaluate(const std::string& dataset_dir, const std::string& results_dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dataset_dir))
        if (entry.is_directory() && fs::exists(entry.path() / "y.osct"))
            ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());

    EvalReport report;
    std::vector<double> pi, po, si, so;
    for (const std::string& id : ids) {
        EvalRow row;
        row.id = id;
        const fs::path sample = fs::path(dataset_dir) / id;
        const fs::path result = fs::path(results_dir) / id / "x.osct";
        if (!fs::exists(result)) {
            row.missing = true;
            report.any_missing = true;
            report.rows.push_back(row);
            continue;
        }
        const Tensor y = read_osct((sample / "y.osct").string());
        const Tensor x = read_osct((sample / "x.osct").string());
        const Tensor I = read_osct((sample / "i.osct").string());
        const Tensor xhat = read_osct(result.string());
        row.psnr_input = psnr_masked(y, x, I);
        row.psnr_output = psnr_masked(xhat, x, I);
        row.ssim_input = ssim_masked(y, x, I);
        row.ssim_output = ssim_masked(xhat, x, I);
        pi.push_back(row.psnr_input);
        po.push_back(row.psnr_output);
        si.push_back(row.ssim_input);
        so.push_back(row.ssim_output);
        report.rows.push_back(row);
    }
    auto mean = [](const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    report.mean_psnr_input = mean(pi);
    report.mean_psnr_output = mean(po);
    report.mean_ssim_input = mean(si);
    report.mean_ssim_output = mean(so);
    report.median_psnr_input = detail::median_of(pi);
    report.median_psnr_output = detail::median_of(po);
    report.median_ssim_input = detail::median_of(si);
    report.median_ssim_output = detail::median_of(so);
    return report;
}

inline void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_report_csv: cannot open " + path);
    f << "id,psnr_input,psnr_output,ssim_input,ssim_output\n";
    for (const EvalRow& r : report.rows) {
        if (r.missing) {
            f << r.id << ",missing,missing,missing,missing\n";
            continue;
        }
        f << r.id << ',' << format_metric(r.psnr_input) << ',' << format_metric(r.psnr_output)
          << ',' << format_metric(r.ssim_input) << ',' << format_metric(r.ssim_output) << "\n";
    }
    f << "mean," << format_metric(report.mean_psnr_input) << ','
      << format_metric(report.mean_psnr_output) << ',' << format_metric(report.mean_ssim_input)
      << ',' << format_metric(report.mean_ssim_output) << "\n";
    f << "median," << format_metric(report.median_psnr_input) << ','
      << format_metric(report.median_psnr_output) << ','
      << format_metric(report.median_ssim_input) << ','
      << format_metric(report.median_ssim_output) << "\n";
}

} // namespace osc
