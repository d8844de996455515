# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.
