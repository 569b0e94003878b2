#include "dnahnet/chunking.hpp"

#include "dnahnet/errors.hpp"
#include "dnahnet/ops.hpp"

namespace dnahnet::chunking {

using namespace dnahnet::ad;

Tensor route(const Tensor& h, const Tensor& wq, const Tensor& wk) {
    const std::size_t L = h.rows();
    if (h.rank() != 2 || L == 0) throw ShapeError("route: expected a non-empty [L, D] input");
    auto first = Tensor::full({1, 1}, 1.0);
    if (L == 1) return first;
    auto q = matmul(slice_rows(h, 1, L), wq);
    auto k = matmul(slice_rows(h, 0, L - 1), wk);
    return concat_rows({first, affine(cosine_rows(q, k), -0.5, 0.5)});
}

std::vector<std::uint8_t> discretize(std::span<const double> p, double threshold) {
    std::vector<std::uint8_t> b(p.size());
    for (std::size_t t = 0; t < p.size(); ++t) b[t] = p[t] > threshold;
    if (!b.empty()) b[0] = 1;
    return b;
}

ChunkedSequence downsample(const Tensor& h, std::span<const std::uint8_t> b, const Tensor& p) {
    const std::size_t L = h.rows();
    if (b.size() != L || p.size() != L) throw ShapeError("downsample: h, b and p lengths differ");
    if (L == 0 || !b[0]) throw ShapeError("downsample: the first position must be a boundary");
    ChunkedSequence out;
    out.chunk_map.resize(L);
    for (std::size_t t = 0; t < L; ++t) {
        if (b[t]) out.boundaries.push_back(t);
        out.chunk_map[t] = out.boundaries.size() - 1;
    }
    out.latents = gather_rows(h, out.boundaries);
    out.boundary_probs = gather_rows(reshape(p, {L, 1}), out.boundaries);
    return out;
}

Tensor smooth(const Tensor& x, const Tensor& P) {
    if (P.rows() != x.rows() || P.cols() != 1) throw ShapeError("smooth: P must be [L', 1] matching x");
    return scan(affine(P, -1.0, 1.0), mul(P, x));
}

Tensor upsample(const Tensor& e, std::span<const std::size_t> chunk_map, const Tensor& p,
                std::span<const std::uint8_t> b, Confidence mode) {
    const std::size_t L = chunk_map.size(), D = e.cols(), Lc = e.rows();
    for (std::size_t t = 0; t < L; ++t) {
        if (chunk_map[t] >= Lc) throw ShapeError("upsample: chunk map points past the last chunk");
    }
    if (mode == Confidence::off) return gather_rows(e, chunk_map);
    if (p.size() != L || b.size() != L) throw ShapeError("upsample: p and b must have one entry per position");

    const auto pv = p.data();
    std::vector<double> coeff(L), sign(L);
    for (std::size_t t = 0; t < L; ++t) {
        sign[t] = b[t] ? 1.0 : -1.0;
        coeff[t] = mode == Confidence::relaxed ? (b[t] ? pv[t] : 1.0 - pv[t]) : 1.0;
    }
    const auto ev = e.data();
    std::vector<double> value(L * D);
    for (std::size_t t = 0; t < L; ++t) {
        const double* src = ev.data() + chunk_map[t] * D;
        double* dst = value.data() + t * D;
        if (mode == Confidence::ste) {
            std::copy_n(src, D, dst);
        } else {
            for (std::size_t j = 0; j < D; ++j) dst[j] = coeff[t] * src[j];
        }
    }
    std::vector<std::size_t> map(chunk_map.begin(), chunk_map.end());
    return make_result(
        "upsample", {L, D}, std::move(value), {e, p},
        [L, D, map = std::move(map), coeff = std::move(coeff), sign = std::move(sign)](Node& self) {
            const auto& g = self.grad;
            auto& enode = *self.parents[0];
            auto& pnode = *self.parents[1];
            std::span<double> ge = enode.requires_grad ? enode.grad_buffer() : std::span<double>();
            std::span<double> gp = pnode.requires_grad ? pnode.grad_buffer() : std::span<double>();
            for (std::size_t t = 0; t < L; ++t) {
                const double* gt = g.data() + t * D;
                const double* et = enode.value.data() + map[t] * D;
                if (!ge.empty()) {
                    double* gdst = ge.data() + map[t] * D;
                    for (std::size_t j = 0; j < D; ++j) gdst[j] += coeff[t] * gt[j];
                }
                if (!gp.empty()) {
                    double dot = 0;
                    for (std::size_t j = 0; j < D; ++j) dot += gt[j] * et[j];
                    gp[t] += sign[t] * dot;
                }
            }
        });
}

double ratio_loss_value(double F, double G, double R) {
    if (!(R > 1.0)) throw DomainError("ratio loss needs a compression target above 1, got " + std::to_string(R));
    return (R / (R - 1.0)) * ((R - 1.0) * F * G + (1.0 - F) * (1.0 - G));
}

Tensor ratio_loss(double F, const Tensor& G, double R) {
    if (!(R > 1.0)) throw DomainError("ratio loss needs a compression target above 1, got " + std::to_string(R));
    const double k = R / (R - 1.0);
    // Linear in G: k (1 - F) + k ((R - 1) F - (1 - F)) G
    return affine(G, k * ((R - 1.0) * F - (1.0 - F)), k * (1.0 - F));
}

}  // namespace dnahnet::chunking
