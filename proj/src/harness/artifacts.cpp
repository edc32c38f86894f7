#include <fstream>
#include <iterator>
#include <memory>

#include <openssl/evp.h>

#include "json.hpp"

#include "fnpar/error.hpp"
#include "fnpar/harness.hpp"

namespace fnpar::harness {

using nlohmann::json;

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        fail(ErrorKind::Io, "sha256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

namespace {

json grid_json(const Grid& g) {
    return {{"dim", g.dim()}, {"radius", g.radius()}, {"points", g.points()}, {"spacing", g.spacing()}};
}

json pair2(const std::array<double, 2>& v) { return json::array({v[0], v[1]}); }

}  // namespace

std::string eigenpair_json(const EigenPair& pair, const std::string& op_name, const std::string& profile_file,
                           const std::string& profile_hash) {
    json j;
    j["operator"] = op_name;
    j["alpha"] = pair.alpha;
    j["converged"] = pair.converged;
    j["tau"] = pair.tau;
    j["alpha_history"] = pair.alpha_history;
    j["envelope"] = {{"delta_upper", pair.envelope.delta_upper},
                     {"C_upper", pair.envelope.C_upper},
                     {"delta_lower", pair.envelope.delta_lower},
                     {"C_lower", pair.envelope.C_lower}};
    j["fit"] = {{"delta", pair.fit.delta}, {"C", pair.fit.C}, {"nodes", pair.fit.nodes}};
    j["grid"] = grid_json(pair.psi.grid);
    j["profile"] = {{"file", profile_file}, {"sha256", profile_hash}, {"format", "fnpar-binary"}};
    return j.dump(2) + "\n";
}

std::string certificate_json(const BarrierCertificate& c, const std::array<std::string, 2>& profile_hashes,
                             const std::optional<BarrierRunReport>& run) {
    const auto& f = c.conditions;
    json j;
    j["p"] = c.p;
    j["q"] = c.q;
    j["alpha1"] = c.alpha1;
    j["alpha2"] = c.alpha2;
    j["a"] = c.a;
    j["b"] = c.b;
    j["epsilon"] = c.epsilon;
    j["epsilon_tilde"] = c.epsilon_tilde;
    j["ratio_bounds"] = pair2(c.ratio_bounds);
    j["window_ratio_bounds"] = pair2(c.window_ratio_bounds);
    j["envelope_bounds"] = pair2(c.envelope_bounds);
    j["ratio_bounds_consistent"] = c.ratio_bounds_consistent();
    j["residual_min"] = pair2(c.residual_min);
    j["t_samples"] = c.t_samples;
    j["exponent_identity_residuals"] = pair2(exponent_identity_residuals(c.p, c.q, c.alpha1, c.alpha2, c.a, c.b));
    j["conditions"] = {{"pq_gt_one", f.pq_gt_one},
                       {"p_q_ge_one", f.p_q_ge_one},
                       {"ellipticity_exponents", f.ellipticity_exponents},
                       {"exponent_thresholds", f.exponent_thresholds},
                       {"exponent_margin_ok", f.exponent_margin_ok},
                       {"ratio1_bounded_envelope", f.ratio1_bounded_envelope},
                       {"ratio2_bounded_envelope", f.ratio2_bounded_envelope},
                       {"ratio1_bounded_fit", f.ratio1_bounded_fit},
                       {"ratio2_bounded_fit", f.ratio2_bounded_fit},
                       {"epsilon_constraint1", c.epsilon_choice.constraint1_ok},
                       {"epsilon_constraint2", c.epsilon_choice.constraint2_ok}};
    j["residual_ok"] = c.residual_ok;
    j["valid"] = c.valid();
    j["profiles_sha256"] = json::array({profile_hashes[0], profile_hashes[1]});
    if (run) {
        j["run"] = {{"blown_up", run->blown_up},
                    {"t_reached", run->t_reached},
                    {"max_ordering_violation", run->max_ordering_violation},
                    {"ordering_violation_t", run->ordering_violation_t},
                    {"samples", run->samples},
                    {"final_sup_norms", pair2(run->final_sup_norms)},
                    {"decay_exponent_fit", run->decay_exponent_fit},
                    {"decay_exponent_predicted", run->decay_exponent_predicted},
                    {"dt", run->dt}};
        if (run->blowup_time) j["run"]["blowup_time"] = *run->blowup_time;
    }
    return j.dump(2) + "\n";
}

}  // namespace fnpar::harness
