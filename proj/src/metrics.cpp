#include "xfuse/metrics.hpp"

#include "xfuse/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace xfuse {

namespace {

void require_same_shape(const Frame& a, const Frame& b) {
    if (!a.same_shape(b))
        throw ValidationError("frame dimensions differ: " + std::to_string(a.width) + "x" +
                              std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                              std::to_string(b.height));
    if (a.pixels.size() != b.pixels.size()) throw ValidationError("pixel buffers differ in size");
}

std::vector<double> to_double(const Frame& f) { return {f.pixels.begin(), f.pixels.end()}; }

// Valid-region separable correlation of an image with a symmetric kernel.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t w, std::size_t h,
                                 const std::vector<double>& taps) {
    const std::size_t k = taps.size();
    const std::size_t ow = w - k + 1, oh = h - k + 1;
    std::vector<double> rows(ow * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) s += taps[i] * img[y * w + x + i];
            rows[y * ow + x] = s;
        }
    std::vector<double> out(ow * oh);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) s += taps[i] * rows[(y + i) * ow + x];
            out[y * ow + x] = s;
        }
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw IoError("malformed number '" + s + "'");
    return v;
}

std::string key_value(const MetricsRow& row, GroupKey key) {
    switch (key) {
        case GroupKey::CaseId: return row.case_id;
        case GroupKey::Method: return row.method;
        case GroupKey::LrSep: return std::to_string(row.lr_sep);
        case GroupKey::HrDs: return std::to_string(row.hr_ds);
        case GroupKey::NoisePsnr: return row.noise_psnr;
    }
    return {};
}

}  // namespace

double mse(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("images differ in size");
    if (a.empty()) throw ValidationError("empty image");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / double(a.size());
}

double psnr(std::span<const double> a, std::span<const double> b, const MetricsConfig& cfg) {
    if (!(cfg.data_range > 0.0)) throw ValidationError("data range must be positive");
    const double e = mse(a, b);
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(cfg.data_range * cfg.data_range / e);
}

double aad(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("images differ in size");
    if (a.empty()) throw ValidationError("empty image");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / double(a.size());
}

double mse(const Frame& a, const Frame& b) {
    require_same_shape(a, b);
    return mse(to_double(a), to_double(b));
}

double psnr(const Frame& a, const Frame& b, const MetricsConfig& cfg) {
    require_same_shape(a, b);
    return psnr(to_double(a), to_double(b), cfg);
}

double aad(const Frame& a, const Frame& b) {
    require_same_shape(a, b);
    return aad(to_double(a), to_double(b));
}

std::vector<double> gaussian_window(int size, double sigma) {
    if (size < 1 || size % 2 == 0) throw ValidationError("SSIM window size must be odd");
    if (!(sigma > 0.0)) throw ValidationError("SSIM window sigma must be positive");
    std::vector<double> taps(static_cast<std::size_t>(size));
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        taps[std::size_t(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += taps[std::size_t(i)];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

double ssim(std::span<const double> a, std::span<const double> b, std::size_t w, std::size_t h,
            const MetricsConfig& cfg) {
    if (a.size() != w * h || b.size() != w * h) throw ValidationError("image size does not match dimensions");
    if (!(cfg.data_range > 0.0)) throw ValidationError("data range must be positive");
    const auto taps = gaussian_window(cfg.ssim_window, cfg.ssim_sigma);
    const std::size_t k = taps.size();
    if (w < k || h < k)
        throw ValidationError("frame " + std::to_string(w) + "x" + std::to_string(h) +
                              " smaller than SSIM window " + std::to_string(k));

    const std::size_t n = w * h;
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end()), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h, taps);
    const auto my = filter_valid(y, w, h, taps);
    const auto mxx = filter_valid(xx, w, h, taps);
    const auto myy = filter_valid(yy, w, h, taps);
    const auto mxy = filter_valid(xy, w, h, taps);

    const double c1 = std::pow(cfg.ssim_k1 * cfg.data_range, 2);
    const double c2 = std::pow(cfg.ssim_k2 * cfg.data_range, 2);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cxy = mxy[i] - mx[i] * my[i];
        const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
        const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
        total += num / den;
    }
    return total / double(mx.size());
}

double ssim(const Frame& a, const Frame& b, const MetricsConfig& cfg) {
    require_same_shape(a, b);
    return ssim(to_double(a), to_double(b), a.width, a.height, cfg);
}

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << kMetricsCsvHeader << '\n';
    for (const auto& r : rows)
        out << r.case_id << ',' << r.method << ',' << r.lr_sep << ',' << r.hr_ds << ','
            << r.noise_psnr << ',' << r.frame << ',' << format_number(r.psnr_db) << ','
            << format_number(r.aad) << ',' << format_number(r.ssim) << '\n';
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("metrics CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsCsvHeader) throw IoError("unexpected metrics CSV header: " + line);
    std::vector<MetricsRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 9)
            throw IoError("metrics CSV line " + std::to_string(line_no) + ": expected 9 fields");
        try {
            MetricsRow r;
            r.case_id = f[0];
            r.method = f[1];
            r.lr_sep = std::stoi(f[2]);
            r.hr_ds = std::stoi(f[3]);
            r.noise_psnr = f[4];
            r.frame = std::stoll(f[5]);
            r.psnr_db = parse_double(f[6]);
            r.aad = parse_double(f[7]);
            r.ssim = parse_double(f[8]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw IoError("metrics CSV line " + std::to_string(line_no) + ": malformed field");
        }
    }
    return rows;
}

GroupKey parse_group_key(const std::string& name) {
    if (name == "case_id") return GroupKey::CaseId;
    if (name == "method") return GroupKey::Method;
    if (name == "lr_sep") return GroupKey::LrSep;
    if (name == "hr_ds") return GroupKey::HrDs;
    if (name == "noise_psnr") return GroupKey::NoisePsnr;
    throw ValidationError("unknown group key '" + name + "'");
}

std::string group_key_name(GroupKey key) {
    switch (key) {
        case GroupKey::CaseId: return "case_id";
        case GroupKey::Method: return "method";
        case GroupKey::LrSep: return "lr_sep";
        case GroupKey::HrDs: return "hr_ds";
        case GroupKey::NoisePsnr: return "noise_psnr";
    }
    return {};
}

BoxStats box_stats(std::vector<double> values) {
    if (values.empty()) throw ValidationError("cannot summarize an empty group");
    std::sort(values.begin(), values.end());
    const auto quantile = [&](double q) {
        const double pos = q * double(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - double(lo);
        if (frac == 0.0) return values[lo];
        return values[lo] + (values[hi] - values[lo]) * frac;
    };
    BoxStats s;
    s.count = values.size();
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / double(values.size());
    return s;
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows,
                                  const std::vector<GroupKey>& keys) {
    if (rows.empty()) throw ValidationError("cannot summarize an empty metrics table");
    std::vector<std::vector<std::string>> order;
    std::map<std::vector<std::string>, std::vector<const MetricsRow*>> groups;
    for (const auto& r : rows) {
        std::vector<std::string> g;
        for (GroupKey k : keys) g.push_back(key_value(r, k));
        auto [it, inserted] = groups.try_emplace(g);
        if (inserted) order.push_back(g);
        it->second.push_back(&r);
    }
    std::vector<SummaryRow> out;
    for (const auto& g : order) {
        const auto& members = groups.at(g);
        std::vector<double> p, a, s;
        for (const MetricsRow* r : members) {
            p.push_back(r->psnr_db);
            a.push_back(r->aad);
            s.push_back(r->ssim);
        }
        out.push_back({g, "psnr_db", box_stats(std::move(p))});
        out.push_back({g, "aad", box_stats(std::move(a))});
        out.push_back({g, "ssim", box_stats(std::move(s))});
    }
    return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                       const std::vector<GroupKey>& keys) {
    for (GroupKey k : keys) out << group_key_name(k) << ',';
    out << "metric,count,min,q1,median,q3,max,mean\n";
    for (const auto& r : rows) {
        for (const auto& v : r.group) out << v << ',';
        const auto& s = r.stats;
        out << r.metric << ',' << s.count << ',' << format_number(s.min) << ','
            << format_number(s.q1) << ',' << format_number(s.median) << ','
            << format_number(s.q3) << ',' << format_number(s.max) << ','
            << format_number(s.mean) << '\n';
    }
}

}  // namespace xfuse
