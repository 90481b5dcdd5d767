#pragma once

#include <bit>
#include <fstream>
#include <json.hpp>

#include "hemoflow/field.hpp"
#include "hemoflow/mlp.hpp"

namespace hemo {

static_assert(std::endian::native == std::endian::little,
              "checkpoint and voxel blobs are little-endian");

/// Characteristic scales mapping physical coordinates into the O(1) range the
/// network sees and its outputs back to physical units: inputs transform as
/// x_nd = (x - shift)/length, t_nd = (t - t_min) * frequency; outputs as
/// u = u_nd * velocity, p = p_nd * pressure.
struct ScaleSet {
    double length = 1.0;     ///< [cm]
    double velocity = 1.0;   ///< [cm/s]
    double pressure = 1.0;   ///< [Ba]
    double frequency = 1.0;  ///< [1/s]
    double t_min = 0.0;      ///< [s]
    Vec3 shift = Vec3::Zero();

    void validate() const {
        require(length > 0 && velocity > 0 && pressure > 0 && frequency > 0, errc::config,
                "scales must be positive");
    }
};

/// The learned flow representation: an MLP over nondimensionalized spacetime
/// with per-channel output scaling. Exposes the generic field interface plus
/// batched paths used in training (values for data losses, full jets for
/// physics losses).
class NeuralField final : public DifferentiableField {
  public:
    NeuralField(NetworkArchitecture arch, ScaleSet scales, std::uint64_t seed)
        : net_(Mlp::kaiming_init(arch, seed)), scales_(scales) {
        scales_.validate();
    }

    NeuralField(Mlp net, ScaleSet scales) : net_(std::move(net)), scales_(scales) {
        scales_.validate();
    }

    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }
    const ScaleSet& scales() const { return scales_; }

    Vec4 in_scale() const {
        double invL = 1.0 / scales_.length;
        return {invL, invL, invL, scales_.frequency};
    }
    Vec4 out_scale() const {
        return {scales_.velocity, scales_.velocity, scales_.velocity, scales_.pressure};
    }

    void scaled_input(const Vec3& x, double t, double* col) const {
        col[0] = (x.x() - scales_.shift.x()) / scales_.length;
        col[1] = (x.y() - scales_.shift.y()) / scales_.length;
        col[2] = (x.z() - scales_.shift.z()) / scales_.length;
        col[3] = (t - scales_.t_min) * scales_.frequency;
    }

    // ---- batched value path ----

    /// Physical velocities and pressure at B spacetime points; columns of the
    /// returned matrix follow the input order.
    const MatrixXd& values(const std::vector<SpacetimePoint>& pts, Mlp::Cache& cache,
                           MatrixXd& out) const {
        MatrixXd X(4, static_cast<Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i)
            scaled_input(pts[i].x, pts[i].t, X.col(static_cast<Index>(i)).data());
        const MatrixXd& y = net_.forward(X, cache);
        out = out_scale().asDiagonal() * y;
        return out;
    }

    /// Chains physical output adjoints (4 x B) into the parameter gradient.
    void values_backward(Mlp::Cache& cache, const MatrixXd& dout_phys, VectorXd& grad) const {
        MatrixXd dY = out_scale().asDiagonal() * dout_phys;
        net_.backward(cache, dY, grad);
    }

    // ---- batched jet path ----

    /// Derivative bundles at B points. Gradient seeds carry the input scaling
    /// so raw jets differentiate with respect to physical coordinates.
    void bundles(const std::vector<SpacetimePoint>& pts, Mlp::JetCache& cache,
                 std::vector<DerivativeBundle>& out) const {
        Index B = static_cast<Index>(pts.size());
        MatrixXd X = MatrixXd::Zero(4, kJetCols * B);
        Vec4 is = in_scale();
        for (Index p = 0; p < B; ++p) {
            scaled_input(pts[p].x, pts[p].t, X.col(kJetCols * p).data());
            for (int i = 0; i < 4; ++i) X(i, kJetCols * p + 1 + i) = is[i];
        }
        const MatrixXd& y = net_.jet_forward(X, cache);
        Vec4 os = out_scale();
        out.resize(pts.size());
        for (Index p = 0; p < B; ++p) {
            DerivativeBundle& b = out[p];
            Index base = kJetCols * p;
            for (int o = 0; o < 4; ++o) {
                b.value[o] = os[o] * y(o, base);
                for (int i = 0; i < 4; ++i) b.jacobian(o, i) = os[o] * y(o, base + 1 + i);
                for (int k = 0; k < kJetHess; ++k) b.second[o][k] = os[o] * y(o, base + 5 + k);
            }
        }
    }

    /// Chains bundle adjoints (same layout as DerivativeBundle) into the
    /// parameter gradient.
    void bundles_backward(Mlp::JetCache& cache, const std::vector<DerivativeBundle>& adj,
                          VectorXd& grad) const {
        Index B = static_cast<Index>(adj.size());
        MatrixXd dY = MatrixXd::Zero(4, kJetCols * B);
        Vec4 os = out_scale();
        for (Index p = 0; p < B; ++p) {
            Index base = kJetCols * p;
            for (int o = 0; o < 4; ++o) {
                dY(o, base) = os[o] * adj[p].value[o];
                for (int i = 0; i < 4; ++i) dY(o, base + 1 + i) = os[o] * adj[p].jacobian(o, i);
                for (int k = 0; k < kJetHess; ++k)
                    dY(o, base + 5 + k) = os[o] * adj[p].second[o][k];
            }
        }
        net_.jet_backward(cache, dY, grad);
    }

    // ---- DifferentiableField interface ----

    Vec4 evaluate(const Vec3& x, double t) const override {
        Mlp::Cache cache;
        MatrixXd out;
        values({{x, t}}, cache, out);
        return out.col(0);
    }

    DerivativeBundle derivatives(const Vec3& x, double t) const override {
        Mlp::JetCache cache;
        std::vector<DerivativeBundle> out;
        bundles({{x, t}}, cache, out);
        return out[0];
    }

  private:
    Mlp net_;
    ScaleSet scales_;
};

// ---- checkpoint format: one JSON header line + little-endian f64 blob ----

inline void save_checkpoint(const NeuralField& f, const std::string& path) {
    nlohmann::ordered_json header{
        {"format", "nf-checkpoint"},
        {"version", 1},
        {"hidden_layers", f.net().arch().hidden_layers},
        {"width", f.net().arch().width},
        {"activation", "swish"},
        {"scales",
         {{"length", f.scales().length},
          {"velocity", f.scales().velocity},
          {"pressure", f.scales().pressure},
          {"frequency", f.scales().frequency},
          {"t_min", f.scales().t_min},
          {"shift", {f.scales().shift.x(), f.scales().shift.y(), f.scales().shift.z()}}}},
    };
    std::ofstream os(path, std::ios::binary);
    if (!os) raise(errc::io, "cannot write checkpoint: " + path);
    os << header.dump() << '\n';
    const VectorXd& theta = f.net().params();
    os.write(reinterpret_cast<const char*>(theta.data()),
             static_cast<std::streamsize>(sizeof(double) * theta.size()));
    if (!os) raise(errc::io, "short write on checkpoint: " + path);
}

inline NeuralField load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) raise(errc::io, "cannot read checkpoint: " + path);
    std::string line;
    std::getline(is, line);
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "nf-checkpoint")
        raise(errc::format, "not a checkpoint file: " + path);
    if (header.value("version", 0) != 1)
        raise(errc::format, "unsupported checkpoint version in " + path);
    NetworkArchitecture arch{header.at("hidden_layers").get<int>(),
                             header.at("width").get<int>()};
    const auto& js = header.at("scales");
    ScaleSet scales;
    scales.length = js.at("length").get<double>();
    scales.velocity = js.at("velocity").get<double>();
    scales.pressure = js.at("pressure").get<double>();
    scales.frequency = js.at("frequency").get<double>();
    scales.t_min = js.at("t_min").get<double>();
    scales.shift = Vec3(js.at("shift")[0].get<double>(), js.at("shift")[1].get<double>(),
                        js.at("shift")[2].get<double>());
    Mlp net(arch);
    is.read(reinterpret_cast<char*>(net.params().data()),
            static_cast<std::streamsize>(sizeof(double) * net.params().size()));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(double) * net.params().size()))
        raise(errc::format, "checkpoint parameter block truncated: " + path);
    char extra;
    if (is.read(&extra, 1))
        raise(errc::format, "checkpoint has trailing bytes: " + path);
    return NeuralField(std::move(net), scales);
}

}  // namespace hemo
