# Geometry, losses, optimizer and pipeline services
