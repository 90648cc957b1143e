#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "pdeop/bench.hpp"
#include "pdeop/io.hpp"
#include "pdeop/nn.hpp"
#include "pdeop/stochastic.hpp"

namespace pdeop::bench {

namespace {

const std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string f3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    if (v != 0.0 && (std::abs(v) < 1e-2 || std::abs(v) >= 1e4))
        std::snprintf(buf, sizeof(buf), "%.1e", v);
    else
        std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Roughly 5 ticks at 1/2/5 multiples.
std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
    return out;
}

std::array<double, 3> viridis(double t) {
    static const double stops[5][3] = {
        {0.267, 0.005, 0.329}, {0.229, 0.322, 0.546}, {0.128, 0.567, 0.551}, {0.369, 0.789, 0.383}, {0.993, 0.906, 0.144}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const int i = std::min(3, int(t));
    const double f = t - i;
    return {stops[i][0] + f * (stops[i + 1][0] - stops[i][0]), stops[i][1] + f * (stops[i + 1][1] - stops[i][1]),
            stops[i][2] + f * (stops[i + 1][2] - stops[i][2])};
}

std::string rgb(const std::array<double, 3>& c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", int(std::lround(255 * c[0])), int(std::lround(255 * c[1])),
                  int(std::lround(255 * c[2])));
    return buf;
}

}  // namespace

std::string line_plot_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series) {
    const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
    const double pad = std::max(1e-6, 0.08 * (y1 - y0));
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
       << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (double t : ticks(x0, x1))
        os << "<line x1=\"" << f3(px(t)) << "\" y1=\"" << H - B << "\" x2=\"" << f3(px(t)) << "\" y2=\"" << H - B + 5
           << "\" stroke=\"#333\"/><text x=\"" << f3(px(t)) << "\" y=\"" << H - B + 18
           << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
    for (double t : ticks(y0, y1))
        os << "<line x1=\"" << L - 5 << "\" y1=\"" << f3(py(t)) << "\" x2=\"" << L << "\" y2=\"" << f3(py(t))
           << "\" stroke=\"#333\"/><text x=\"" << L - 8 << "\" y=\"" << f3(py(t) + 4)
           << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(xlabel)
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << (T + H - B) / 2 << ")\">" << escape(ylabel) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kColors[k % kColors.size()];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
        if (s.dashed) os << " stroke-dasharray=\"6 4\"";
        os << " points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (std::isfinite(s.y[i])) os << f3(px(s.x[i])) << ',' << f3(py(s.y[i])) << ' ';
        os << "\"/>\n";
        const double ly = T + 14 + 20.0 * double(k);
        os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 36 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "")
           << "/><text x=\"" << W - R + 42 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string heatmap_triptych_svg(const std::string& title, const Mat& exact, const Mat& predicted, double final_time,
                                 double length) {
    if (exact.rows() != predicted.rows() || exact.cols() != predicted.cols())
        throw DimensionError("heatmap panels must have equal shapes");
    const Mat err = (exact - predicted).cwiseAbs();
    const double lo = std::min(exact.minCoeff(), predicted.minCoeff());
    const double hi = std::max(exact.maxCoeff(), predicted.maxCoeff());
    const double emax = std::max(err.maxCoeff(), 1e-300);

    // sample at most 100 x 100 cells per panel
    const Eigen::Index rows = std::min<Eigen::Index>(exact.rows(), 100);
    const Eigen::Index cols = std::min<Eigen::Index>(exact.cols(), 100);
    const double pw = 240, ph = 220, gap = 60, L = 50, T = 50;
    const double W = L + 3 * pw + 2 * gap + 30, H = T + ph + 90;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
       << "</text>\n";
    const Mat* panels[3] = {&exact, &predicted, &err};
    const char* names[3] = {"solver", "operator", "absolute error"};
    for (int p = 0; p < 3; ++p) {
        const double ox = L + p * (pw + gap);
        const double a = p == 2 ? 0.0 : lo, b = p == 2 ? emax : hi;
        const double scale = b > a ? 1.0 / (b - a) : 0.0;
        os << "<text x=\"" << ox + pw / 2 << "\" y=\"" << T - 8 << "\" text-anchor=\"middle\">" << names[p]
           << "</text>\n<g shape-rendering=\"crispEdges\">\n";
        const double cw = pw / double(cols), ch = ph / double(rows);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const Eigen::Index k = r * (exact.rows() - 1) / std::max<Eigen::Index>(1, rows - 1);
            for (Eigen::Index c = 0; c < cols; ++c) {
                const Eigen::Index i = c * (exact.cols() - 1) / std::max<Eigen::Index>(1, cols - 1);
                const double v = ((*panels[p])(k, i) - a) * scale;
                // time increases upward
                os << "<rect x=\"" << f3(ox + c * cw) << "\" y=\"" << f3(T + ph - (r + 1) * ch) << "\" width=\""
                   << f3(cw + 0.05) << "\" height=\"" << f3(ch + 0.05) << "\" fill=\"" << rgb(viridis(v))
                   << "\"/>\n";
            }
        }
        os << "</g>\n";
        os << "<text x=\"" << ox + pw / 2 << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">x in [0, "
           << tick_label(length) << "]</text>\n";
        os << "<text x=\"" << ox - 8 << "\" y=\"" << T + ph << "\" text-anchor=\"end\">0</text>";
        os << "<text x=\"" << ox - 8 << "\" y=\"" << T + 10 << "\" text-anchor=\"end\">" << tick_label(final_time)
           << "</text>\n";
        // colorbar
        const double by = T + ph + 32;
        for (int s = 0; s < 50; ++s)
            os << "<rect x=\"" << f3(ox + s * pw / 50) << "\" y=\"" << by << "\" width=\"" << f3(pw / 50 + 0.05)
               << "\" height=\"10\" fill=\"" << rgb(viridis(s / 49.0)) << "\"/>";
        os << "\n<text x=\"" << ox << "\" y=\"" << by + 24 << "\">" << tick_label(a) << "</text><text x=\""
           << ox + pw << "\" y=\"" << by + 24 << "\" text-anchor=\"end\">" << tick_label(b) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<std::filesystem::path> write_overlay_plots(const std::filesystem::path& dir,
                                                       const std::vector<ResultRecord>& records) {
    std::map<std::pair<std::string, std::string>, std::vector<const ResultRecord*>> groups;
    for (const auto& r : records)
        if (r.ok && !r.terminal.empty()) groups[{r.system, r.target}].push_back(&r);
    std::vector<std::filesystem::path> out;
    for (const auto& [key, rs] : groups) {
        std::vector<Series> series;
        series.push_back({"target", rs.front()->x, rs.front()->target_values, true});
        for (const auto* r : rs) series.push_back({r->method, r->x, r->terminal, false});
        std::string name = key.second;
        for (char& c : name)
            if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
        const auto path = dir / ("terminal_" + key.first + "_" + name + ".svg");
        io::write_text(path, line_plot_svg(key.first + ": terminal state, target " + key.second, "x", "y(T, x)",
                                           series));
        out.push_back(path);
    }
    return out;
}

std::vector<std::filesystem::path> write_operator_plots(const std::filesystem::path& dir,
                                                        const std::filesystem::path& artifacts,
                                                        const std::vector<SystemKind>& systems) {
    std::vector<std::filesystem::path> out;
    for (auto kind : systems) {
        const auto ckpt = artifact_dir(artifacts, kind) / "operator.ckpt";
        if (!std::filesystem::exists(ckpt)) continue;
        const auto op = nn::load_operator(ckpt);
        const Simulator sim(default_system(kind));
        if (op.config().n != sim.grid().n()) continue;
        // a held-out style control drawn with a seed outside the training range
        stochastic::DatasetOptions d;
        d.count = 1;
        d.bounds = sim.spec().bounds;
        d.seed = 0x5eed0fULL;
        d.kernel = stochastic::default_kernel(sim.spec().static_control() ? sim.grid().length()
                                                                            : sim.grid().final_time(),
                                              d.bounds);
        const auto ds = sim.spec().static_control() ? stochastic::generate_static_control_dataset(sim, d)
                                                    : stochastic::generate_weight_trajectory_dataset(sim, d);
        const auto& item = ds.items.front();
        Mat pred(item.states.rows(), item.states.cols());
        pred.row(0) = item.states.row(0);
        for (Eigen::Index k = 0; k + 1 < pred.rows(); ++k)
            pred.row(k + 1) = op.eval_step(pred.row(k), item.inputs.row(k));
        const auto path = dir / ("operator_" + pdeop::to_string(kind) + ".svg");
        char title[128];
        std::snprintf(title, sizeof(title), "%s operator rollout, max abs error %.2e", pdeop::to_string(kind).c_str(),
                      (item.states - pred).cwiseAbs().maxCoeff());
        io::write_text(path, heatmap_triptych_svg(title, item.states, pred, sim.grid().final_time(),
                                                  sim.grid().length()));
        out.push_back(path);
    }
    return out;
}

}  // namespace pdeop::bench
