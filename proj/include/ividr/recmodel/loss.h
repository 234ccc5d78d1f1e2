/*
 * Copyright 2026 The IViDR Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef IVIDR_RECMODEL_LOSS_H_
#define IVIDR_RECMODEL_LOSS_H_

#include "ividr/numerics/mlp.h"

namespace ividr::recmodel {

// Binary cross-entropy of label y ∈ {0, 1} against sigmoid(logit), written
// as softplus(logit) − y · logit so large logits do not overflow.
inline double bce_with_logit(double logit, double y) { return numerics::softplus(logit) - y * logit; }

// ∂/∂logit of bce_with_logit.
inline double bce_with_logit_grad(double logit, double y) { return numerics::sigmoid(logit) - y; }

}  // namespace ividr::recmodel

#endif  // IVIDR_RECMODEL_LOSS_H_
