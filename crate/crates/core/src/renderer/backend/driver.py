"""Headless Blender driver: builds and renders one scene from a directive file.

Usage: blender --background --factory-startup --python driver.py -- DIRECTIVES ROOT
"""

import json
import math
import os
import sys

import bpy
from mathutils import Matrix, Vector

argv = sys.argv[sys.argv.index("--") + 1 :]
directive_path, root = argv[0], argv[1]
with open(directive_path, encoding="utf-8") as f:
    d = json.load(f)


def resolve(p):
    return p if os.path.isabs(p) else os.path.join(root, p)


def srgb_to_linear(c):
    c = c / 255.0
    return c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4


bpy.ops.wm.read_factory_settings(use_empty=True)
scene = bpy.context.scene

# Import keeping the file's own axes so the bounds match the directive.
mesh_path = resolve(d["model"]["mesh"])
ext = os.path.splitext(mesh_path)[1].lower()
before = set(bpy.data.objects)
if ext == ".obj":
    if hasattr(bpy.ops.wm, "obj_import"):
        bpy.ops.wm.obj_import(filepath=mesh_path, forward_axis="Y", up_axis="Z")
    else:
        bpy.ops.import_scene.obj(filepath=mesh_path, axis_forward="Y", axis_up="Z")
elif ext in (".glb", ".gltf"):
    bpy.ops.import_scene.gltf(filepath=mesh_path)
elif ext == ".fbx":
    bpy.ops.import_scene.fbx(filepath=mesh_path)
elif ext == ".stl":
    if hasattr(bpy.ops.wm, "stl_import"):
        bpy.ops.wm.stl_import(filepath=mesh_path, forward_axis="Y", up_axis="Z")
    else:
        bpy.ops.import_mesh.stl(filepath=mesh_path, axis_forward="Y", axis_up="Z")
elif ext == ".blend":
    with bpy.data.libraries.load(mesh_path) as (src, dst):
        dst.objects = src.objects
    for o in dst.objects:
        if o is not None:
            scene.collection.objects.link(o)
else:
    sys.exit("unsupported mesh format: " + ext)

meshes = [o for o in bpy.data.objects if o not in before and o.type == "MESH"]
if not meshes:
    sys.exit("no mesh objects imported from " + mesh_path)
obj = meshes[0]
bpy.ops.object.select_all(action="DESELECT")
for o in meshes:
    o.select_set(True)
bpy.context.view_layer.objects.active = obj
if len(meshes) > 1:
    bpy.ops.object.join()
bpy.ops.object.transform_apply(location=True, rotation=True, scale=True)

# Neutral pose: bounds centre at the origin, then one principal-axis turn.
lo, hi = Vector(d["model"]["bounds"]["min"]), Vector(d["model"]["bounds"]["max"])
obj.data.transform(Matrix.Translation(-(lo + hi) / 2))
obj.location = (0.0, 0.0, 0.0)
obj.rotation_mode = "XYZ"
rot = [0.0, 0.0, 0.0]
rot["xyz".index(d["model"]["rotation"]["axis"])] = math.radians(d["model"]["rotation"]["degrees"])
obj.rotation_euler = rot

# Materials: body everywhere, display texture on the exported face.
body = bpy.data.materials.new("body")
body.use_nodes = True
body.node_tree.nodes["Principled BSDF"].inputs["Base Color"].default_value = [
    srgb_to_linear(c) for c in d["model"]["body_color"]
] + [1.0]

screen = bpy.data.materials.new("display")
screen.use_nodes = True
nodes = screen.node_tree.nodes
tex = nodes.new("ShaderNodeTexImage")
tex.image = bpy.data.images.load(resolve(d["display"]["texture"]))
tex.interpolation = "Closest"
screen.node_tree.links.new(tex.outputs["Color"], nodes["Principled BSDF"].inputs["Base Color"])

mesh = obj.data
mesh.materials.clear()
mesh.materials.append(body)
mesh.materials.append(screen)
face_index = d["model"]["face_index"]
if face_index >= len(mesh.polygons):
    sys.exit("face index %d out of range (%d faces)" % (face_index, len(mesh.polygons)))
for poly in mesh.polygons:
    poly.material_index = 0
face = mesh.polygons[face_index]
face.material_index = 1
if len(face.loop_indices) != 4:
    sys.exit("display face must be a quad")
if not mesh.uv_layers:
    mesh.uv_layers.new(name="UVMap")
uv_data = mesh.uv_layers.active.data
for corner, loop in enumerate(face.loop_indices):
    uv_data[loop].uv = d["display"]["uv"][corner]

# Camera: Blender cameras look down local -Z with +Y up.
cam = d["camera"]
look, up = Vector(cam["look_dir"]), Vector(cam["up"])
right = look.cross(up)
cam_data = bpy.data.cameras.new("camera")
cam_data.lens = cam["focal_length"]
cam_data.sensor_fit = "HORIZONTAL"
cam_data.sensor_width = cam["sensor_width"]
cam_obj = bpy.data.objects.new("camera", cam_data)
scene.collection.objects.link(cam_obj)
basis = Matrix((right, up, -look)).transposed().to_4x4()
basis.translation = Vector(cam["position"])
cam_obj.matrix_world = basis
scene.camera = cam_obj

light = d["light"]
light_data = bpy.data.lights.new("light", type="POINT")
light_data.energy = light["energy"]
light_data.color = light["color"]
light_data.shadow_soft_size = light["radius"]
light_data.use_nodes = True
lnodes = light_data.node_tree.nodes
falloff = lnodes.new("ShaderNodeLightFalloff")
falloff.inputs["Strength"].default_value = light["energy"]
falloff.inputs["Smooth"].default_value = light["falloff"]
light_data.node_tree.links.new(falloff.outputs["Quadratic"], lnodes["Emission"].inputs["Strength"])
light_obj = bpy.data.objects.new("light", light_data)
light_obj.location = light["position"]
scene.collection.objects.link(light_obj)

world = bpy.data.worlds.new("world")
world.color = (0.05, 0.05, 0.05)
scene.world = world

render = d["render"]
scene.render.engine = "CYCLES"
scene.cycles.samples = 64
scene.render.resolution_x, scene.render.resolution_y = render["resolution"]
scene.render.resolution_percentage = 100
scene.render.film_transparent = False
scene.render.image_settings.file_format = "PNG"
scene.render.image_settings.color_mode = "RGB"
scene.render.image_settings.color_depth = "8"

view_layer = scene.view_layers[0]
view_layer.use_pass_z = render["passes"]["depth"]
view_layer.use_pass_diffuse_color = render["passes"].get("albedo", False)
view_layer.use_pass_diffuse_direct = render["passes"].get("shading", False)
view_layer.use_pass_normal = render["passes"].get("normal", False)

# Depth: normalise between the directive bounds and write a 16-bit PNG.
outputs = {k: resolve(v) for k, v in d["outputs"].items()}
for path in outputs.values():
    os.makedirs(os.path.dirname(path), exist_ok=True)
scene.use_nodes = True
tree = scene.node_tree
tree.nodes.clear()
layers = tree.nodes.new("CompositorNodeRLayers")
composite = tree.nodes.new("CompositorNodeComposite")
tree.links.new(layers.outputs["Image"], composite.inputs["Image"])
near, far = render["depth_bounds"]
depth_map = tree.nodes.new("CompositorNodeMapRange")
depth_map.inputs["From Min"].default_value = near
depth_map.inputs["From Max"].default_value = far
depth_map.inputs["To Min"].default_value = 0.0
depth_map.inputs["To Max"].default_value = 1.0
depth_map.use_clamp = True
tree.links.new(layers.outputs["Depth"], depth_map.inputs["Value"])
depth_out = tree.nodes.new("CompositorNodeOutputFile")
depth_out.base_path = os.path.dirname(outputs["depth"])
depth_out.format.file_format = "PNG"
depth_out.format.color_mode = "BW"
depth_out.format.color_depth = "16"
depth_out.format.color_management = "OVERRIDE"
depth_out.format.view_settings.view_transform = "Raw"
stem = os.path.splitext(os.path.basename(outputs["depth"]))[0] + "_frame"
depth_out.file_slots[0].path = stem
tree.links.new(depth_map.outputs["Value"], depth_out.inputs[0])

scene.view_settings.view_transform = "Standard"
scene.render.filepath = outputs["rgb"]
scene.frame_set(1)
bpy.ops.render.render(write_still=True)

written = os.path.join(depth_out.base_path, "%s%04d.png" % (stem, scene.frame_current))
if not os.path.exists(written):
    sys.exit("depth pass was not written: " + written)
os.replace(written, outputs["depth"])
print("dmdforge: rendered", d["id"])
