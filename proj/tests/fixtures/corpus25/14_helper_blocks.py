import keras
from keras.models import Sequential
from keras.layers import Conv2D, Activation, MaxPooling2D, Flatten, Dense


def add_block(m, filters):
    m.add(Conv2D(filters, (3, 3)))
    m.add(Activation('relu'))
    m.add(MaxPooling2D(pool_size=(2, 2)))


model = Sequential()
model.add(Conv2D(8, (3, 3), activation='relu', input_shape=(3, 64, 64)))
add_block(model, 16)
add_block(model, 32)
model.add(Flatten())
model.add(Dense(10, activation='softmax'))
model.compile(optimizer='rmsprop', loss='categorical_crossentropy')
