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
from setuptools import setup, find_packages

setup(name="qdptools", packages=find_packages(exclude=["qdptools_examples"]),
      python_requires=">=3.8",
      install_requires=["numpy>=1.18", "scipy>=1.5", "h5py", "toml", "dill"],
      extras_require={"mpi": ["mpi4py"],
                      "test": ["pytest", "pytest-timeout"]},
      entry_points={"console_scripts": ["qdptools=qdptools.cli:main"]})
