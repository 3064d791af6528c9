from setuptools import setup, find_packages

version = "0.1.0"

setup(
    name='damic',
    version=version,
    packages=find_packages(),
    python_requires='>=3.7',
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.4',
        'click',
        'pyyaml',
        'peewee>=3.0',
        'semantic_version>=2.7',
    ],
    tests_require=['pytest'],
    classifiers=[
        'Programming Language :: Python :: 3',
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    package_data={
        'damic': ['specfiles/*.yaml', 'tests/data/*'],
    },
    include_package_data=True,
    description='Clustering with a mixture of deep autoencoders and a softmax gate.',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    entry_points={'console_scripts': ['damic = damic.main:main']},
)
