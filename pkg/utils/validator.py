"""
File validator for checking input types and sizes
"""
import os
from typing import Tuple

from errors import UnsupportedFormat


class FileValidator:
    """Validate input files before they reach a reader"""

    # Supported raster types
    RASTER_EXTENSIONS = {
        '.tif': 'GeoTIFF',
        '.tiff': 'GeoTIFF',
        '.json': 'Raw raster with JSON sidecar',
    }

    # Everything else the CLI reads
    DOCUMENT_EXTENSIONS = {
        '.txt': 'Tiepoint interchange file',
        '.tp': 'Tiepoint interchange file',
        '.json': 'JSON document',
    }

    # Maximum file size (4GB)
    MAX_FILE_SIZE = 4 * 1024 * 1024 * 1024

    @staticmethod
    def validate_file(file_path: str, kind: str = "raster") -> Tuple[bool, str]:
        """
        Validate if file exists, is supported and within size limits

        Args:
            file_path: path to check
            kind: "raster" or "document"

        Returns:
            Tuple of (is_valid, message)
        """
        if not os.path.exists(file_path):
            return False, f"File does not exist: {file_path}"

        table = FileValidator.RASTER_EXTENSIONS if kind == "raster" else FileValidator.DOCUMENT_EXTENSIONS
        _, ext = os.path.splitext(file_path)
        ext = ext.lower()

        if ext not in table:
            return False, f"Unsupported file type: {ext}. Supported types: {', '.join(table.keys())}"

        file_size = os.path.getsize(file_path)
        if file_size > FileValidator.MAX_FILE_SIZE:
            return False, f"File too large: {file_size / (1024*1024):.2f}MB"

        if file_size == 0:
            return False, f"File is empty: {file_path}"

        return True, f"Valid {table[ext]}"

    @staticmethod
    def raster_format(file_path: str) -> str:
        """Detect the raster format by extension ("geotiff" or "sidecar")"""
        _, ext = os.path.splitext(file_path)
        ext = ext.lower()
        if ext in ('.tif', '.tiff'):
            return "geotiff"
        if ext == '.json':
            return "sidecar"
        raise UnsupportedFormat(
            f"Unsupported raster type: {ext or '<none>'}. "
            f"Supported types: {', '.join(FileValidator.RASTER_EXTENSIONS.keys())}"
        )

