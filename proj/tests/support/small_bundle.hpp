#pragma once

#include "fform/eval.hpp"
#include "fform/rng.hpp"

namespace oracle {

/// Bundle trained once per process on a small synthetic corpus.
inline const fform::ModelBundle& small_bundle() {
    static const fform::ModelBundle bundle = [] {
        using namespace fform;
        const std::vector<Scene> train = generate_dataset(standard_dataset_spec(16, 101), 102);
        ModelBundle b;
        b.crf = train_crf_from_scenes(train, {}).model;
        b.formation_svm = train_svm_task(train, SvmTask::Formation, {}).model;
        b.angle_svm = train_svm_task(train, SvmTask::Angle, {}).model;
        b.joint_svm = train_svm_task(train, SvmTask::Joint, {}).model;
        return b;
    }();
    return bundle;
}

} // namespace oracle
