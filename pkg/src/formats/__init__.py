"""
Readers and writers for depth maps, masks, manifests and reports.
"""
