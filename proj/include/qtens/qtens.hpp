/* Copyright 2026 The qtens Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef QTENS_QTENS_HPP_
#define QTENS_QTENS_HPP_

#include "qtens/admm.hpp"
#include "qtens/conv.hpp"
#include "qtens/cp_als.hpp"
#include "qtens/quantize.hpp"
#include "qtens/tensor.hpp"
#include "qtens/tensor_file.hpp"

#endif  // QTENS_QTENS_HPP_
