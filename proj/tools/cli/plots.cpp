#include "plots.hpp"

#include <algorithm>
#include <cstdio>
#include <opencv2/imgproc.hpp>
#include <string>

namespace cdo::cli {
namespace {

const cv::Scalar kNormal(60, 160, 60);
const cv::Scalar kAbnormal(50, 50, 210);
const cv::Scalar kInk(40, 40, 40);
constexpr int kMargin = 48;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void label(cv::Mat& m, const std::string& text, cv::Point at, double scale = 0.45, cv::Scalar color = kInk) {
    cv::putText(m, text, at, cv::FONT_HERSHEY_SIMPLEX, scale, color, 1, cv::LINE_AA);
}

// Plot frame with y ticks at 0 and y_max; returns the inner rectangle.
cv::Rect frame(cv::Mat& m, double x_lo, double x_hi, double y_max, const std::string& title) {
    const cv::Rect inner(kMargin, kMargin / 2 + 8, m.cols - kMargin - 16, m.rows - kMargin - kMargin / 2 - 8);
    cv::rectangle(m, inner, kInk, 1);
    label(m, title, {kMargin, 18}, 0.5);
    label(m, num(x_lo), {inner.x - 8, inner.br().y + 18});
    label(m, num(x_hi), {inner.br().x - 24, inner.br().y + 18});
    label(m, num(y_max), {4, inner.y + 10});
    label(m, "0", {kMargin - 14, inner.br().y});
    return inner;
}

}  // namespace

cv::Mat to_bgr8(const RgbImage& img) {
    cv::Mat out(img.h, img.w, CV_8UC3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at<cv::Vec3b>(y, x)[2 - c] = cv::saturate_cast<std::uint8_t>(img(y, x, c) * 255.0f + 0.5f);
    return out;
}

cv::Mat dd_histogram_plot(const DDStats& dd, int width, int height) {
    cv::Mat m(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
    const std::size_t bins = dd.hist_n.size();
    double top = 1e-12;
    for (std::size_t b = 0; b < bins; ++b) top = std::max({top, dd.hist_n[b], dd.hist_a[b]});
    const cv::Rect r = frame(m, dd.lo, dd.hi, top, "discrepancy distributions (normal green, abnormal red)");
    const double bw = static_cast<double>(r.width) / static_cast<double>(std::max<std::size_t>(bins, 1));

    auto bars = [&](const std::vector<double>& hist, const cv::Scalar& color) {
        cv::Mat overlay = m.clone();
        for (std::size_t b = 0; b < bins; ++b) {
            const int x0 = r.x + static_cast<int>(b * bw), x1 = r.x + static_cast<int>((b + 1) * bw);
            const int y = r.br().y - static_cast<int>(hist[b] / top * r.height);
            cv::rectangle(overlay, cv::Point(x0, y), cv::Point(std::max(x1 - 1, x0), r.br().y), color, cv::FILLED);
        }
        cv::addWeighted(overlay, 0.45, m, 0.55, 0.0, m);
    };
    bars(dd.hist_n, kNormal);
    bars(dd.hist_a, kAbnormal);

    const double span = dd.hi > dd.lo ? dd.hi - dd.lo : 1.0;
    auto mark = [&](double mu, const cv::Scalar& c) {
        const int x = r.x + static_cast<int>((mu - dd.lo) / span * r.width);
        cv::line(m, {x, r.y}, {x, r.br().y}, c, 2);
    };
    mark(dd.mu_n, kNormal);
    mark(dd.mu_a, kAbnormal);
    label(m, "margin " + num(dd.margin) + "  overlap " + num(dd.overlap), {r.br().x - 230, r.y + 18});
    return m;
}

cv::Mat curves_plot(const std::vector<EpochLog>& logs, int width, int height) {
    cv::Mat m(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
    if (logs.empty()) {
        label(m, "no epochs logged", {kMargin, height / 2}, 0.6);
        return m;
    }
    double top = 1e-12;
    for (const auto& l : logs) top = std::max({top, l.mu_n, l.mu_s});
    const cv::Rect r = frame(m, logs.front().epoch, logs.back().epoch, top, "mean discrepancy per epoch (mu_n green, mu_s red)");
    const double first = logs.front().epoch, span = std::max(1.0, logs.back().epoch - first);
    auto curve = [&](auto field, const cv::Scalar& c) {
        std::vector<cv::Point> pts;
        for (const auto& l : logs)
            pts.emplace_back(r.x + static_cast<int>((l.epoch - first) / span * r.width),
                             r.br().y - static_cast<int>(field(l) / top * r.height));
        cv::polylines(m, pts, false, c, 2, cv::LINE_AA);
        for (const auto& p : pts) cv::circle(m, p, 2, c, cv::FILLED);
    };
    curve([](const EpochLog& l) { return l.mu_n; }, kNormal);
    curve([](const EpochLog& l) { return l.mu_s; }, kAbnormal);
    return m;
}

cv::Mat triptych(const RgbImage& input, const Mask& truth, const ScalarField& map, float lo, float hi) {
    const cv::Mat a = to_bgr8(input);
    cv::Mat gt(truth.h, truth.w, CV_8U);
    for (int y = 0; y < truth.h; ++y)
        for (int x = 0; x < truth.w; ++x) gt.at<std::uint8_t>(y, x) = truth(y, x) ? 255 : 0;
    cv::cvtColor(gt, gt, cv::COLOR_GRAY2BGR);

    cv::Mat q(map.h, map.w, CV_8U);
    const float span = hi > lo ? hi - lo : 1.0f;
    for (int y = 0; y < map.h; ++y)
        for (int x = 0; x < map.w; ++x)
            q.at<std::uint8_t>(y, x) = cv::saturate_cast<std::uint8_t>((map(y, x) - lo) / span * 255.0f);
    cv::Mat heat;
    cv::applyColorMap(q, heat, cv::COLORMAP_JET);

    cv::Mat row;
    cv::hconcat(std::vector<cv::Mat>{a, gt, heat}, row);
    const int scale = std::max(1, 256 / std::max(1, input.h));
    if (scale > 1) cv::resize(row, row, {}, scale, scale, cv::INTER_NEAREST);
    return row;
}

}  // namespace cdo::cli
