#include "twohand/metrics.hpp"

#include <algorithm>
#include <limits>

namespace twohand {
namespace {

Points stack(const Points& a, const Points& b)
{
    Points out(a.rows() + b.rows(), 3);
    out << a, b;
    return out;
}

}  // namespace

AlignmentResult align_scale_translation(const Points& pred, const Points& gt, const std::vector<bool>& mask)
{
    if (pred.rows() != gt.rows())
        throw DimensionMismatch("prediction and ground truth have different row counts");
    if (!mask.empty() && mask.size() != static_cast<std::size_t>(pred.rows()))
        throw DimensionMismatch("mask length does not match the point count");
    auto use = [&](Eigen::Index i) { return mask.empty() || mask[i]; };
    int count = 0;
    Vec3 pc = Vec3::Zero(), gc = Vec3::Zero();
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        if (!use(i))
            continue;
        pc += pred.row(i).transpose();
        gc += gt.row(i).transpose();
        ++count;
    }
    if (count < 2)
        throw EmptyMetric("alignment needs at least two valid points");
    pc /= count;
    gc /= count;
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        if (!use(i))
            continue;
        const Vec3 p = pred.row(i).transpose() - pc;
        num += p.dot(gt.row(i).transpose() - gc);
        den += p.squaredNorm();
    }
    if (!(den > 0.0))
        throw DegenerateInput("predicted points coincide");
    AlignmentResult r;
    r.scale = std::max(num / den, 0.0);
    r.translation = gc - r.scale * pc;
    r.aligned = (r.scale * pred).rowwise() + r.translation.transpose();
    return r;
}

double mpjpe(const Joints3& pred, const Joints3& gt, const Visibility& valid)
{
    double sum = 0.0;
    int count = 0;
    for (int hand = 0; hand < 2; ++hand) {
        const int off = hand * kKeypointCount;
        bool any = false;
        for (int j = 0; j < kKeypointCount; ++j)
            any = any || valid[off + j];
        if (!any)
            continue;
        if (!valid[off])
            throw InvalidArgument("wrist must be valid to align a hand");
        const Vec3 shift = (gt.row(off) - pred.row(off)).transpose();
        for (int j = 0; j < kKeypointCount; ++j) {
            if (!valid[off + j])
                continue;
            sum += (pred.row(off + j).transpose() + shift - gt.row(off + j).transpose()).norm();
            ++count;
        }
    }
    if (count == 0)
        throw EmptyMetric("no valid joints");
    return 1e3 * sum / count;
}

double i_mpjpe(const Joints3& pred, const Joints3& gt, const Visibility& valid)
{
    const std::vector<bool> mask(valid.begin(), valid.end());
    const AlignmentResult a = align_scale_translation(pred, gt, mask);
    double sum = 0.0;
    int count = 0;
    for (int j = 0; j < kTwoHandKeypoints; ++j) {
        if (!valid[j])
            continue;
        sum += (a.aligned.row(j) - gt.row(j)).norm();
        ++count;
    }
    return 1e3 * sum / count;
}

double mpvpe(const TwoHandMesh& pred, const TwoHandMesh& gt)
{
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Side s : {Side::Left, Side::Right}) {
        const Points& p = pred.vertices(s);
        const Points& g = gt.vertices(s);
        if (p.rows() != g.rows())
            throw DimensionMismatch("vertex counts differ");
        const int wrist = s == Side::Left ? 0 : kKeypointCount;
        const Vec3 shift = (gt.joints_3d.row(wrist) - pred.joints_3d.row(wrist)).transpose();
        sum += ((p.rowwise() + shift.transpose()) - g).rowwise().norm().sum();
        count += p.rows();
    }
    if (count == 0)
        throw EmptyMetric("meshes have no vertices");
    return 1e3 * sum / static_cast<double>(count);
}

double i_mpvpe(const TwoHandMesh& pred, const TwoHandMesh& gt)
{
    if (pred.left_vertices.rows() != gt.left_vertices.rows() || pred.right_vertices.rows() != gt.right_vertices.rows())
        throw DimensionMismatch("vertex counts differ");
    const Points p = stack(pred.left_vertices, pred.right_vertices);
    const Points g = stack(gt.left_vertices, gt.right_vertices);
    const AlignmentResult a = align_scale_translation(p, g);
    return 1e3 * (a.aligned - g).rowwise().norm().mean();
}

const char* interaction_name(Interaction i)
{
    switch (i) {
    case Interaction::Single: return "single";
    case Interaction::Interacting: return "interacting";
    case Interaction::CloselyInteracting: return "closely-interacting";
    }
    return "?";
}

Interaction classify_interaction(const Joints3& gt, const Visibility& valid)
{
    const int count = static_cast<int>(std::count(valid.begin(), valid.end(), true));
    if (count <= 30)
        return Interaction::Single;
    double sum = 0.0;
    for (int j = 0; j < kTwoHandKeypoints; ++j) {
        if (!valid[j])
            continue;
        const int other = j < kKeypointCount ? kKeypointCount : 0;
        double best = std::numeric_limits<double>::infinity();
        for (int k = other; k < other + kKeypointCount; ++k)
            if (valid[k])
                best = std::min(best, (gt.row(j) - gt.row(k)).norm());
        sum += best;
    }
    return sum / count < 0.040 ? Interaction::CloselyInteracting : Interaction::Interacting;
}

}  // namespace twohand
