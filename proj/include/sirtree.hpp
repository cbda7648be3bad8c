// Copyright 2026 The sirtree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Umbrella header.

#ifndef SIRTREE_SIRTREE_HPP_
#define SIRTREE_SIRTREE_HPP_

#include "sirtree/couplings.hpp"
#include "sirtree/errors.hpp"
#include "sirtree/freezetree.hpp"
#include "sirtree/lambertw.hpp"
#include "sirtree/polya.hpp"
#include "sirtree/rng.hpp"
#include "sirtree/theory.hpp"
#include "sirtree/version.hpp"
#include "sirtree/walks.hpp"

#endif  // SIRTREE_SIRTREE_HPP_
