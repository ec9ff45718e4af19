"""Geometry oracles: SDFs, meshes, sampling, marching cubes, voxel grids."""

from .fields import (ConstantField, FuncField, PrimitiveField, SdfField,
                     UnionField, sdf_gradient, sdf_normals)
from .marching import field_grid, marching_cubes, sample_field_surface
from .mesh import (MeshField, TriangleMesh, brute_force_distance, load_obj,
                   load_ply, merge_meshes, sample_mesh_surface, save_obj,
                   winding_numbers)
from .primitives import (KINDS, primitive_aabb, primitive_area, primitive_sdf,
                         primitive_sdf_local, primitive_surface_sample,
                         primitive_volume)
from .voxel import (DEFAULT_BOUNDS, VoxelGrid, brute_force_voxelize,
                    voxel_centers, voxelize, voxelize_mesh)

__all__ = [
    "ConstantField", "FuncField", "PrimitiveField", "SdfField", "UnionField",
    "sdf_gradient", "sdf_normals", "field_grid", "marching_cubes",
    "sample_field_surface", "MeshField", "TriangleMesh", "brute_force_distance",
    "load_obj", "load_ply", "merge_meshes", "sample_mesh_surface", "save_obj",
    "winding_numbers", "KINDS", "primitive_aabb", "primitive_area",
    "primitive_sdf", "primitive_sdf_local", "primitive_surface_sample",
    "primitive_volume", "DEFAULT_BOUNDS", "VoxelGrid", "brute_force_voxelize",
    "voxel_centers", "voxelize", "voxelize_mesh",
]
