#
# Copyright 2026 The qdptools developers
#
#    This file is part of qdptools.
#
#    qdptools is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    qdptools is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with qdptools.  If not, see <https://www.gnu.org/licenses/>.
#
from . import qstate
from . import embed
from . import qfi
from . import mech
from . import transport
from . import adversary
from . import audit
from . import harness
