# Camera-height scale recovery package
